#include "nv/presets.hpp"

namespace nv {

namespace {

RateModel make(double gamma, double s0, double s1, double d0, double d1) {
  RateModel m;
  m.radiative = gamma;
  m.shelving_ms0 = s0;
  m.shelving_ms1 = s1;
  m.deshelving_ms0 = d0;
  m.deshelving_ms1 = d1;
  m.detection = kPresetDetection;
  return m;
}

}  // namespace

RateModel preset(const std::string& name) {
  if (name == "NV1") return make(67.4, 9.9, 91.6, 4.83, 2.11);
  if (name == "NV2") return make(67.1, 10.2, 88.6, 4.79, 2.11);
  if (name == "NV3") return make(65.9, 11.4, 92.1, 4.84, 2.35);
  throw InvalidParameterError("unknown preset: " + name + " (expected NV1, NV2, or NV3)");
}

bool is_preset(const std::string& name) {
  return name == "NV1" || name == "NV2" || name == "NV3";
}

}  // namespace nv

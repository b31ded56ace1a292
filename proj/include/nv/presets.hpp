#pragma once

#include <string>

#include "nv/photophysics.hpp"

namespace nv {

// Detection scale shared by the presets: chosen so that the mean detected
// photons in a 225 ns window at twice the saturation intensity is ~0.06
// for the NV1 parameter set.
inline constexpr double kPresetDetection = 0.0143721;

/// Named defect parameter sets (NV1, NV2, NV3). The excitation rate is left
/// at zero; set it via intensity_to_rate or with_excitation.
/// Throws InvalidParameterError for an unknown name.
RateModel preset(const std::string& name);

bool is_preset(const std::string& name);

}  // namespace nv

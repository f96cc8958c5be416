#pragma once

#include <string>

#include "xmodal/nn.hpp"

namespace xmodal {

// Line-oriented text format: header "layers d0 d1 .. dn", then per layer the
// weight rows followed by the bias line, 17 significant digits (lossless for
// 64-bit reals).
void save_model(const std::string& path, const MlpNetwork& net);
MlpNetwork load_model(const std::string& path);

}  // namespace xmodal

#pragma once

namespace radau_ep {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace radau_ep

#ifndef NECO_VERSION_HPP
#define NECO_VERSION_HPP

namespace neco {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace neco

#endif  // NECO_VERSION_HPP

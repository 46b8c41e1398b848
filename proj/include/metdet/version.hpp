#ifndef METDET_VERSION_HPP
#define METDET_VERSION_HPP

namespace metdet {

inline constexpr const char* kToolName = "metdet";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace metdet

#endif

#ifndef METDET_ERROR_HPP
#define METDET_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace metdet {

// Error class determines the CLI exit code: io -> 1, validation -> 2,
// numeric -> 3.
enum class errc { io, validation, numeric };

class error : public std::runtime_error {
 public:
  error(errc kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  errc kind() const noexcept { return kind_; }

  // Short stable identifier, e.g. "BadTargetIndex", "SequenceTooLong".
  const std::string& code() const noexcept { return code_; }

 private:
  errc kind_;
  std::string code_;
};

inline error io_error(const std::string& code, const std::string& msg) {
  return error(errc::io, code, msg);
}
inline error validation_error(const std::string& code, const std::string& msg) {
  return error(errc::validation, code, msg);
}
inline error numeric_error(const std::string& code, const std::string& msg) {
  return error(errc::numeric, code, msg);
}

}  // namespace metdet

#endif

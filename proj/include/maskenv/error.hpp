#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maskenv {

enum class Errc {
  NoValidPlacement,
  DimensionMismatch,
  DecayWithMultipleMasks,
  IndexOutOfRange,
  SteppedAfterTerminal,
  ConfigInvalid,
  IoFailure,
  Protocol,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NoValidPlacement: return "NoValidPlacement";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DecayWithMultipleMasks: return "DecayWithMultipleMasks";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::SteppedAfterTerminal: return "SteppedAfterTerminal";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::IoFailure: return "IoFailure";
    case Errc::Protocol: return "Protocol";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace maskenv

#pragma once

#include <stdexcept>
#include <string>

namespace hmf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// argument outside the mathematical domain of an operation
class DomainError : public Error { using Error::Error; };
// a quadrature could not certify its target tolerance
class ToleranceError : public Error { using Error::Error; };
// no trace sample at or before the requested time
class HistoryTooShort : public Error { using Error::Error; };
class CflError : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };
class LostBubble : public Error { using Error::Error; };
class TableRangeError : public Error { using Error::Error; };
class DegenerateInput : public Error { using Error::Error; };
class SignMismatch : public Error { using Error::Error; };
class UnresolvedBubble : public Error { using Error::Error; };
class OverlappingBubbles : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace hmf

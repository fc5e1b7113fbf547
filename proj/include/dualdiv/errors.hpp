#pragma once

#include <stdexcept>
#include <string>

namespace dualdiv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Model validation
class NotSubordinatorViolation : public Error { public: using Error::Error; };
class InvalidPhaseType : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };

// Numerical evaluation
class SingularResolvent : public Error { public: using Error::Error; };
class BracketFailure : public Error { public: using Error::Error; };
class MultipleRootDetected : public Error { public: using Error::Error; };
class ContourTooClose : public Error { public: using Error::Error; };
class KnotEvaluation : public Error { public: using Error::Error; };

// Problem setup
class InvalidCost : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

// Front end
class ParseError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };

}  // namespace dualdiv

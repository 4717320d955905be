#pragma once

#include <stdexcept>
#include <string>

namespace robreg {

// Bad input: shapes, ranges, malformed configuration. The CLI maps these to exit code 2.
class InvalidArgument : public std::invalid_argument {
public:
	explicit InvalidArgument(const std::string &what) : std::invalid_argument(what) {}
};

// Weight-prior hyperparameters that make the tilted posterior improper.
class InvalidHyperparameter : public InvalidArgument {
public:
	explicit InvalidHyperparameter(const std::string &what) : InvalidArgument(what) {}
};

// Base for numerical failures (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
	explicit NumericError(const std::string &what) : std::runtime_error(what) {}
};

class SingularMatrix : public NumericError {
public:
	SingularMatrix(const std::string &what, double condition)
	    : NumericError(what + " (condition estimate " + std::to_string(condition) + ")"), condition_(condition) {}

	double condition() const { return condition_; }

private:
	double condition_;
};

// XX^T - delta*I is too close to singular for the adaptive attack.
class UnstableDelta : public SingularMatrix {
public:
	UnstableDelta(const std::string &what, double condition) : SingularMatrix(what, condition) {}
};

} // namespace robreg

#pragma once

#include <stdexcept>
#include <string>

namespace gridest {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CyclicGraph : Error {
  using Error::Error;
};
struct Disconnected : Error {
  using Error::Error;
};
struct BadSlack : Error {
  using Error::Error;
};
struct ZeroImpedance : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct MissingAngles : Error {
  using Error::Error;
};
struct MissingAngleGuess : Error {
  using Error::Error;
};
struct DegeneratePolar : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// Forward load flow failed to reach the mismatch tolerance.
struct NoConvergence : Error {
  NoConvergence(int iterations, double final_mismatch)
      : Error("load flow did not converge after " + std::to_string(iterations) +
              " iterations (mismatch " + std::to_string(final_mismatch) + ")"),
        iterations(iterations),
        final_mismatch(final_mismatch) {}
  int iterations;
  double final_mismatch;
};

struct SingularJacobian : Error {
  explicit SingularJacobian(double rcond)
      : Error("Jacobian numerically singular (rcond " + std::to_string(rcond) + ")"),
        rcond(rcond) {}
  double rcond;
};

}  // namespace gridest

#ifndef SKYPARK_TYPES_HPP
#define SKYPARK_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace skypark {

using Vec3 = Eigen::Vector3d;
using DroneId = int;
using TimeStep = int;  // discrete show time index, multiples of StageConfig::dt

enum class DroneStatus { kActive, kFallen, kHidden, kParked };

const char* to_string(DroneStatus status);

/// Scenario or input file is malformed; CLI exits nonzero on this.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A drone body lies entirely outside the stage volume.
class OffStageError : public std::runtime_error {
 public:
  explicit OffStageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An action violates the speed or acceleration limits.
class InfeasibleActionError : public std::runtime_error {
 public:
  InfeasibleActionError(const std::string& msg, int step_index = -1)
      : std::runtime_error(msg), step_index(step_index) {}
  int step_index;  // index of the failing step within a plan, -1 if standalone
};

/// Planner could not reach the goal region within its budget.
/// Surfaces in incident reports, never as a crash of the pipeline.
class CapacityError : public std::runtime_error {
 public:
  CapacityError(const std::string& msg, DroneId id) : std::runtime_error(msg), drone(id) {}
  DroneId drone;
};

}  // namespace skypark

#endif  // SKYPARK_TYPES_HPP

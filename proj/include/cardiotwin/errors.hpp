#pragma once

#include <stdexcept>
#include <string>

namespace cardiotwin {

/// Invalid user-supplied parameter (geometry, reaction, config values).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input data that violates a documented precondition or file schema.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mesh surfaces could not be classified (unlabelled or contradictory boundary).
struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Electrode coincides with or lies inside the myocardium.
struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a mapping (e.g. AHA segment of an RV node).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct FeatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cardiotwin

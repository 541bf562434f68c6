#pragma once

#include "nssolver/model.hpp"
#include "nssolver/training.hpp"

#include <memory>
#include <string>

namespace nss {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat little-endian binary: magic "NSCK", version, parameter count, then
// per parameter name length/name/shape/row-major doubles.
void save_parameters(const std::string& path, const ad::ParameterStore& store);
void load_parameters(const std::string& path, ad::ParameterStore& store);

// parameters plus a JSON metadata sidecar (<path>.meta.json) carrying the
// vocabularies and dimensions needed to rebuild the model
void save_model(const std::string& path, const NsModel& model,
                const TrainingConfig& config);

struct LoadedModel {
  std::unique_ptr<NsModel> model;
  TrainingConfig config;
};

LoadedModel load_model(const std::string& path);

}  // namespace nss

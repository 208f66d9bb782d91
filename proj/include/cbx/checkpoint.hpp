#pragma once

#include <string>

#include "cbx/cbm.hpp"
#include "cbx/cme.hpp"
#include "cbx/vae.hpp"

namespace cbx {

// Checkpoints are a versioned binary blob of named parameter blocks plus a
// JSON manifest describing how to rebuild the networks. Reloading reproduces
// bit-identical predictions.
//
// save_* writes <path>.bin and <path>.json.
void save_cbm(const std::string& path, CBModel& model);
CBModel load_cbm(const std::string& path);

void save_task_model(const std::string& path, TaskModel& model);
TaskModel load_task_model(const std::string& path);

void save_vae(const std::string& path, VAEModel& model);
VAEModel load_vae(const std::string& path);

// Latent probes ride alongside model checkpoints as tree-ensemble JSON.
void save_probes(const std::string& path, const std::vector<TreeEnsemble>& probes);
std::vector<TreeEnsemble> load_probes(const std::string& path);

}  // namespace cbx

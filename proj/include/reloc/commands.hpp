#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "reloc/dataset.hpp"
#include "reloc/mining.hpp"
#include "reloc/model.hpp"
#include "reloc/train.hpp"

// Pipeline stages as testable library calls. Each command reads and writes
// only through its arguments, throws the module error types on failure and
// produces byte-identical outputs for identical inputs and seed.
namespace reloc {

struct SynthCmdArgs {
  std::filesystem::path out;  // scene directory to create
  SyntheticSceneConfig config;
};

struct SynthCmdResult {
  std::filesystem::path scene_dir;
  int database_frames = 0;
  int query_frames = 0;
};

SynthCmdResult cmd_synth(const SynthCmdArgs& args);

struct MineCmdArgs {
  std::filesystem::path scene;  // scene directory
  std::filesystem::path out;    // output directory
  double min_overlap = 0.3;
  MiningConfig mining;  // stride / per-anchor cap / threads
};

struct MineCmdResult {
  std::filesystem::path pairs_path;
  std::filesystem::path quadruplets_path;
  std::size_t pair_count = 0;
  std::size_t quadruplet_count = 0;
};

MineCmdResult cmd_mine(const MineCmdArgs& args);

struct TrainCmdArgs {
  std::filesystem::path scene;
  std::filesystem::path out;  // receives checkpoint.rfck + metadata.json
  TrainPhase phase = TrainPhase::kPretrain;
  std::filesystem::path pairs;            // pretrain input
  std::filesystem::path quadruplets;      // finetune input
  std::filesystem::path init_checkpoint;  // finetune input (pretrained model)
  std::string variant = "PL+PA+H";        // finetune only
  EncoderConfig encoder;                  // seed drives initialization
  TrainSchedule schedule;
  double beta = 1.0;
  double margin = 0.2;
  bool dual_triplet = false;
};

struct TrainCmdResult {
  std::filesystem::path checkpoint_path;
  std::filesystem::path metadata_path;
  std::vector<double> epoch_losses;
};

TrainCmdResult cmd_train(const TrainCmdArgs& args);

struct IndexCmdArgs {
  std::filesystem::path scene;
  std::filesystem::path checkpoint;
  std::filesystem::path out;  // index file path
};

struct IndexCmdResult {
  std::filesystem::path index_path;
  std::size_t entry_count = 0;
  int dim = 0;
};

IndexCmdResult cmd_index(const IndexCmdArgs& args);

struct EvalCmdArgs {
  std::filesystem::path scene;
  std::filesystem::path checkpoint;
  std::filesystem::path index;
  std::filesystem::path out;  // receives report.txt + report.json
  int threads = 1;
};

struct EvalCmdResult {
  std::filesystem::path text_path;
  std::filesystem::path json_path;
  EvalReport report;
  double wall_ms_per_query = 0.0;  // measured, console-only (not in files)
};

EvalCmdResult cmd_eval(const EvalCmdArgs& args);

struct LocalizeCmdArgs {
  std::filesystem::path scene;
  std::filesystem::path checkpoint;
  std::filesystem::path index;
  std::string frame_id;  // query frame within the scene
  int k = 1;             // neighbors to report
};

struct LocalizeCmdResult {
  Pose pose;                 // composed prediction
  Pose ground_truth;         // from the scene
  std::string neighbor_id;   // top-1
  double translation_error = 0.0;
  double rotation_error_deg = 0.0;
  std::vector<std::pair<std::string, double>> neighbors;  // top-k (id, distance)
};

LocalizeCmdResult cmd_localize(const LocalizeCmdArgs& args);

}  // namespace reloc

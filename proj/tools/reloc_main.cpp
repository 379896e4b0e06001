// Command-line front end: one subcommand per pipeline stage.
//
// Exit codes: 0 success; 2 usage errors (including unknown loss variants);
// 3 file/format errors; 4 data/geometry domain errors; 1 anything else.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reloc/commands.hpp"
#include "reloc/errors.hpp"
#include "reloc/losses.hpp"

namespace {

using namespace reloc;

int run_synth(const SynthCmdArgs& args) {
  const SynthCmdResult result = cmd_synth(args);
  std::cout << "scene written to " << result.scene_dir.string() << " ("
            << result.database_frames << " database / " << result.query_frames
            << " query frames)\n";
  return 0;
}

int run_mine(const MineCmdArgs& args) {
  const MineCmdResult result = cmd_mine(args);
  std::cout << "mined " << result.pair_count << " training pairs -> "
            << result.pairs_path.string() << "\n"
            << "mined " << result.quadruplet_count << " quadruplets -> "
            << result.quadruplets_path.string() << "\n";
  return 0;
}

int run_train(const TrainCmdArgs& args) {
  const TrainCmdResult result = cmd_train(args);
  std::cout << "checkpoint written to " << result.checkpoint_path.string() << "\n";
  if (!result.epoch_losses.empty()) {
    std::cout << "epoch-1 mean loss " << result.epoch_losses.front()
              << ", final mean loss " << result.epoch_losses.back() << "\n";
  }
  return 0;
}

int run_index(const IndexCmdArgs& args) {
  const IndexCmdResult result = cmd_index(args);
  std::cout << "indexed " << result.entry_count << " database frames (dim "
            << result.dim << ") -> " << result.index_path.string() << "\n";
  return 0;
}

int run_eval(const EvalCmdArgs& args) {
  const EvalCmdResult result = cmd_eval(args);
  std::cout << render_report_text(result.report);
  std::cout << "reports written to " << result.text_path.string() << " and "
            << result.json_path.string() << "\n";
  std::cout << "measured " << result.wall_ms_per_query
            << " ms per query (wall clock, not stored in reports)\n";
  return 0;
}

int run_localize(const LocalizeCmdArgs& args) {
  const LocalizeCmdResult result = cmd_localize(args);
  std::cout << "query frame     " << args.frame_id << "\n"
            << "predicted pose  " << pose_to_string(result.pose) << "\n"
            << "ground truth    " << pose_to_string(result.ground_truth) << "\n"
            << "error           " << result.translation_error << " m / "
            << result.rotation_error_deg << " deg\n";
  for (std::size_t i = 0; i < result.neighbors.size(); ++i) {
    std::cout << "neighbor " << (i + 1) << "      " << result.neighbors[i].first
              << " (distance " << result.neighbors[i].second << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Retrieval-based camera relocalization: synthesize scenes, mine "
      "covisibility pairs, train pose-aware embeddings, index, evaluate."};
  app.require_subcommand(1);

  // --- synth ---
  SynthCmdArgs synth;
  std::string synth_layout = "orbit";
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene");
  synth_cmd->add_option("--out", synth.out, "Scene output directory")->required();
  synth_cmd->add_option("--seed", synth.config.seed, "Scene seed");
  synth_cmd->add_option("--name", synth.config.name, "Scene name");
  synth_cmd->add_option("--db-frames", synth.config.database_frames,
                        "Database (train) frame count");
  synth_cmd->add_option("--query-frames", synth.config.query_frames,
                        "Query (test) frame count");
  synth_cmd->add_option("--layout", synth_layout, "Camera layout: orbit|box")
      ->check(CLI::IsMember({"orbit", "box"}));
  synth_cmd->add_option("--plane-distance", synth.config.plane_distance,
                        "World plane distance (m)");
  synth_cmd->add_option("--orbit-radius", synth.config.orbit_radius,
                        "Orbit ring radius (m)");
  synth_cmd->add_option("--target-swing", synth.config.orbit_target_swing,
                        "Look-at lateral swing amplitude (m)");
  synth_cmd->add_option("--depth-noise", synth.config.depth_noise,
                        "Uniform depth noise amplitude (m)");
  synth_cmd->add_option("--feature-dim", synth.config.feature.dim,
                        "Frame feature dimensionality");

  // --- mine ---
  MineCmdArgs mine;
  CLI::App* mine_cmd =
      app.add_subcommand("mine", "Mine training pairs and difficulty quadruplets");
  mine_cmd->add_option("--scene", mine.scene, "Scene directory")->required();
  mine_cmd->add_option("--out", mine.out, "Output directory")->required();
  mine_cmd->add_option("--min-overlap", mine.min_overlap,
                       "Minimum bilateral overlap for training pairs");
  mine_cmd->add_option("--stride", mine.mining.stride, "Depth subsampling stride");
  mine_cmd->add_option("--per-anchor-cap", mine.mining.per_anchor_cap,
                       "Quadruplets per anchor");
  mine_cmd->add_option("--threads", mine.mining.threads, "Worker threads");

  // --- train ---
  TrainCmdArgs train;
  std::string train_phase = "pretrain";
  std::string train_preset = "desk";
  std::string train_optimizer;
  std::vector<int> train_dims;
  int train_epochs = 0;
  double train_lr = 0.0;
  int train_batch = 0;
  int train_max_samples = 0;
  double train_momentum = 0.0;
  CLI::App* train_cmd = app.add_subcommand("train", "Pretrain or fine-tune a model");
  train_cmd->add_option("--scene", train.scene, "Scene directory")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--phase", train_phase, "pretrain|finetune")
      ->required()
      ->check(CLI::IsMember({"pretrain", "finetune"}));
  train_cmd->add_option("--pairs", train.pairs, "pairs.jsonl (pretrain)");
  train_cmd->add_option("--quadruplets", train.quadruplets,
                        "quadruplets.jsonl (finetune)");
  train_cmd->add_option("--init", train.init_checkpoint,
                        "Pretrained checkpoint (finetune)");
  train_cmd->add_option("--variant", train.variant,
                        "Loss variant label (finetune), e.g. PL+PA+H");
  train_cmd->add_option("--seed", train.encoder.seed,
                        "Seed for initialization and shuffling");
  train_cmd->add_option("--preset", train_preset, "Schedule preset: desk|full")
      ->check(CLI::IsMember({"desk", "full"}));
  CLI::Option* opt_epochs = train_cmd->add_option("--epochs", train_epochs, "Epochs");
  CLI::Option* opt_lr = train_cmd->add_option("--lr", train_lr, "Learning rate");
  CLI::Option* opt_batch = train_cmd->add_option("--batch", train_batch, "Batch size");
  CLI::Option* opt_opt =
      train_cmd->add_option("--optimizer", train_optimizer, "adam|sgd")
          ->check(CLI::IsMember({"adam", "sgd"}));
  CLI::Option* opt_momentum =
      train_cmd->add_option("--momentum", train_momentum, "SGD momentum");
  CLI::Option* opt_max_samples = train_cmd->add_option(
      "--max-samples", train_max_samples, "Samples per epoch cap (0 = all)");
  train_cmd->add_option("--beta", train.beta, "Quaternion weight in the pose loss");
  train_cmd->add_option("--margin", train.margin, "Triplet margin");
  train_cmd->add_flag("--dual-triplet", train.dual_triplet,
                      "Add the medium-vs-hard hinge to PL+FTL");
  train_cmd->add_option("--input-dim", train.encoder.input_dim,
                        "Model input dimensionality");
  train_cmd->add_option("--block-dims", train_dims, "Four encoder block widths")
      ->expected(4);

  // --- index ---
  IndexCmdArgs index;
  CLI::App* index_cmd =
      app.add_subcommand("index", "Build the database embedding index");
  index_cmd->add_option("--scene", index.scene, "Scene directory")->required();
  index_cmd->add_option("--checkpoint", index.checkpoint, "Model checkpoint")
      ->required();
  index_cmd->add_option("--out", index.out, "Index file path")->required();

  // --- eval ---
  EvalCmdArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate retrieval-only and full-pipeline medians");
  eval_cmd->add_option("--scene", eval.scene, "Scene directory")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--index", eval.index, "Index file")->required();
  eval_cmd->add_option("--out", eval.out, "Report output directory")->required();
  eval_cmd->add_option("--threads", eval.threads, "Worker threads");

  // --- localize ---
  LocalizeCmdArgs localize;
  CLI::App* localize_cmd =
      app.add_subcommand("localize", "Localize one frame (debugging)");
  localize_cmd->add_option("--scene", localize.scene, "Scene directory")->required();
  localize_cmd->add_option("--checkpoint", localize.checkpoint, "Model checkpoint")
      ->required();
  localize_cmd->add_option("--index", localize.index, "Index file")->required();
  localize_cmd->add_option("--frame", localize.frame_id, "Frame id to localize")
      ->required();
  localize_cmd->add_option("--k", localize.k, "Neighbors to report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) {
      synth.config.layout =
          synth_layout == "box" ? SceneLayout::kBox : SceneLayout::kOrbit;
      return run_synth(synth);
    }
    if (mine_cmd->parsed()) {
      return run_mine(mine);
    }
    if (train_cmd->parsed()) {
      train.phase =
          train_phase == "pretrain" ? TrainPhase::kPretrain : TrainPhase::kFinetune;
      const bool full = train_preset == "full";
      if (train.phase == TrainPhase::kPretrain) {
        train.schedule = full ? full_pretrain_schedule(train.encoder.seed)
                              : desk_pretrain_schedule(train.encoder.seed);
      } else {
        train.schedule = full ? full_finetune_schedule(train.encoder.seed)
                              : desk_finetune_schedule(train.encoder.seed);
      }
      if (opt_epochs->count() > 0) train.schedule.epochs = train_epochs;
      if (opt_lr->count() > 0) train.schedule.learning_rate = train_lr;
      if (opt_batch->count() > 0) train.schedule.batch_size = train_batch;
      if (opt_momentum->count() > 0) train.schedule.sgd_momentum = train_momentum;
      if (opt_max_samples->count() > 0) {
        train.schedule.max_samples_per_epoch = train_max_samples;
      }
      if (opt_opt->count() > 0) {
        train.schedule.optimizer = train_optimizer == "adam" ? OptimizerKind::kAdam
                                                             : OptimizerKind::kSgd;
      }
      if (!train_dims.empty()) {
        for (int i = 0; i < kNumStages; ++i) {
          train.encoder.block_dims[static_cast<std::size_t>(i)] =
              train_dims[static_cast<std::size_t>(i)];
        }
      }
      return run_train(train);
    }
    if (index_cmd->parsed()) {
      return run_index(index);
    }
    if (eval_cmd->parsed()) {
      return run_eval(eval);
    }
    return run_localize(localize);
  } catch (const UnknownVariant& e) {
    std::cerr << "error: " << e.what() << "\nvalid variants:";
    for (const std::string& label : all_variant_labels()) std::cerr << " " << label;
    std::cerr << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const UnsupportedFormat& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

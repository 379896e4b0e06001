#include "reloc/commands.hpp"

#include <chrono>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "reloc/errors.hpp"
#include "reloc/index.hpp"
#include "reloc/losses.hpp"

namespace reloc {
namespace {

using ordered_json = nlohmann::ordered_json;

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << content;
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

char hex_digit(unsigned v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

std::string hex_u64(std::uint64_t v) {
  std::string s = "0x";
  for (int shift = 60; shift >= 0; shift -= 4) {
    s += hex_digit(static_cast<unsigned>((v >> shift) & 0xF));
  }
  return s;
}

ordered_json schedule_json(const TrainSchedule& s) {
  return ordered_json{
      {"epochs", s.epochs},
      {"optimizer", s.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
      {"learning_rate", s.learning_rate},
      {"batch_size", s.batch_size},
      {"seed", s.seed},
      {"sgd_momentum", s.sgd_momentum},
      {"max_samples_per_epoch", s.max_samples_per_epoch}};
}

// Stage-1 embeddings for every database frame, one batched forward pass.
Eigen::MatrixXd database_embeddings(const ModelParams& params,
                                    const std::vector<const Frame*>& frames) {
  Eigen::MatrixXd x(params.config.input_dim, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i]->features.size() != params.config.input_dim) {
      throw ShapeMismatch("frame feature length does not match model input_dim");
    }
    x.col(static_cast<Eigen::Index>(i)) = frames[i]->features;
  }
  return encode_batch(params, x, 1).act[0];
}

}  // namespace

SynthCmdResult cmd_synth(const SynthCmdArgs& args) {
  const Scene scene = generate_synthetic_scene(args.config);
  export_scene(scene, args.out);
  SynthCmdResult result;
  result.scene_dir = args.out;
  result.database_frames = static_cast<int>(scene.database_frames().size());
  result.query_frames = static_cast<int>(scene.query_frames().size());
  return result;
}

MineCmdResult cmd_mine(const MineCmdArgs& args) {
  const Scene scene = load_scene(args.scene);
  const std::vector<const Frame*> db = scene.database_frames();
  if (db.empty()) {
    throw DomainError("scene has no database frames to mine");
  }
  const std::vector<Quadruplet> quadruplets = mine_quadruplets(db, args.mining);
  const std::vector<OverlapPair> pairs =
      mine_overlap_pairs(db, args.min_overlap, args.mining);

  ensure_directory(args.out);
  MineCmdResult result;
  result.pairs_path = args.out / "pairs.jsonl";
  result.quadruplets_path = args.out / "quadruplets.jsonl";
  save_overlap_pairs(result.pairs_path, pairs, args.min_overlap, args.mining);
  save_quadruplets(result.quadruplets_path, quadruplets, args.mining);
  result.pair_count = pairs.size();
  result.quadruplet_count = quadruplets.size();
  return result;
}

TrainCmdResult cmd_train(const TrainCmdArgs& args) {
  const Scene scene = load_scene(args.scene);

  TrainResult trained;
  std::size_t sample_count = 0;
  if (args.phase == TrainPhase::kPretrain) {
    if (args.pairs.empty()) {
      throw DomainError("pretraining requires a pairs file");
    }
    const std::vector<OverlapPair> pairs = load_overlap_pairs(args.pairs);
    const std::vector<PosePairSample> samples = build_pair_samples(scene, pairs);
    sample_count = samples.size();
    trained = pretrain(init_model(args.encoder), samples, args.schedule, args.beta);
  } else {
    if (args.quadruplets.empty()) {
      throw DomainError("fine-tuning requires a quadruplets file");
    }
    if (args.init_checkpoint.empty()) {
      throw DomainError("fine-tuning requires a pretrained checkpoint");
    }
    const std::vector<Quadruplet> quadruplets = load_quadruplets(args.quadruplets);
    const std::vector<QuadrupletSample> samples =
        build_quadruplet_samples(scene, quadruplets);
    sample_count = samples.size();
    const ModelParams init = load_checkpoint(args.init_checkpoint);
    LossConfig loss;
    loss.variant = parse_variant(args.variant);
    loss.beta = args.beta;
    loss.margin = args.margin;
    loss.dual_triplet = args.dual_triplet;
    trained = finetune(init, samples, loss, args.schedule);
  }

  ensure_directory(args.out);
  TrainCmdResult result;
  result.checkpoint_path = args.out / "checkpoint.rfck";
  result.metadata_path = args.out / "metadata.json";
  result.epoch_losses = trained.epoch_losses;
  save_checkpoint(result.checkpoint_path, trained.params);

  ordered_json meta;
  meta["phase"] = args.phase == TrainPhase::kPretrain ? "pretrain" : "finetune";
  if (args.phase == TrainPhase::kFinetune) {
    meta["variant"] = args.variant;
  }
  meta["encoder"] = ordered_json{
      {"input_dim", trained.params.config.input_dim},
      {"block_dims", trained.params.config.block_dims},
      {"seed", trained.params.config.seed},
      {"digest", hex_u64(trained.params.config.digest())}};
  meta["loss"] = ordered_json{
      {"beta", args.beta}, {"margin", args.margin}, {"dual_triplet", args.dual_triplet}};
  meta["schedule"] = schedule_json(args.schedule);
  meta["samples"] = sample_count;
  meta["epoch_losses"] = trained.epoch_losses;
  write_text_file(result.metadata_path, meta.dump(2) + "\n");
  return result;
}

IndexCmdResult cmd_index(const IndexCmdArgs& args) {
  const Scene scene = load_scene(args.scene);
  const ModelParams params = load_checkpoint(args.checkpoint);
  const std::vector<const Frame*> db = scene.database_frames();
  if (db.empty()) {
    throw DomainError("scene has no database frames to index");
  }

  const Eigen::MatrixXd embeddings = database_embeddings(params, db);
  EmbeddingIndex index(static_cast<int>(embeddings.rows()));
  for (std::size_t i = 0; i < db.size(); ++i) {
    IndexEntry entry;
    entry.frame_id = db[i]->id;
    entry.embedding = embeddings.col(static_cast<Eigen::Index>(i));
    entry.pose = db[i]->pose;
    index.insert(std::move(entry));
  }

  if (args.out.has_parent_path()) {
    ensure_directory(args.out.parent_path());
  }
  index.save(args.out);
  IndexCmdResult result;
  result.index_path = args.out;
  result.entry_count = index.size();
  result.dim = index.dim();
  return result;
}

EvalCmdResult cmd_eval(const EvalCmdArgs& args) {
  const Scene scene = load_scene(args.scene);
  const ModelParams params = load_checkpoint(args.checkpoint);
  const EmbeddingIndex index = EmbeddingIndex::load(args.index);

  const auto start = std::chrono::steady_clock::now();
  EvalReport report = evaluate(params, index, scene, args.threads);
  const auto stop = std::chrono::steady_clock::now();
  const double total_ms =
      std::chrono::duration<double, std::milli>(stop - start).count();

  ensure_directory(args.out);
  EvalCmdResult result;
  result.text_path = args.out / "report.txt";
  result.json_path = args.out / "report.json";
  write_text_file(result.text_path, render_report_text(report));
  write_text_file(result.json_path, render_report_json(report));
  result.wall_ms_per_query =
      total_ms / static_cast<double>(report.average.query_count);
  result.report = std::move(report);
  return result;
}

LocalizeCmdResult cmd_localize(const LocalizeCmdArgs& args) {
  const Scene scene = load_scene(args.scene);
  const ModelParams params = load_checkpoint(args.checkpoint);
  const EmbeddingIndex index = EmbeddingIndex::load(args.index);
  const Frame& frame = scene.frame(args.frame_id);

  const Eigen::VectorXd e1 = encode_batch(params, frame.features, 1).act[0].col(0);
  const auto neighbors = index.query_knn(e1, args.k);

  LocalizeCmdResult result;
  result.pose = localize(params, index, frame.features);
  result.ground_truth = frame.pose;
  result.neighbor_id = neighbors.front().first->frame_id;
  result.translation_error = (result.pose.t - frame.pose.t).norm();
  result.rotation_error_deg = rotation_error_degrees(result.pose.q, frame.pose.q);
  for (const auto& [entry, distance] : neighbors) {
    result.neighbors.emplace_back(entry->frame_id, distance);
  }
  return result;
}

}  // namespace reloc

// mib: train, sample, evaluate and render motion in-betweening models.
//
// Exit codes: 0 success, 2 bad flags, 3 data errors, 4 non-finite loss.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mib/data.hpp"
#include "mib/errors.hpp"
#include "mib/eval.hpp"
#include "mib/log.hpp"
#include "mib/model.hpp"
#include "mib/motion.hpp"
#include "mib/render.hpp"
#include "mib/text.hpp"
#include "mib/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadFlags = 2;
constexpr int kExitData = 3;
constexpr int kExitNonFinite = 4;

struct TrainArgs {
  std::string config_path;
  std::string data_dir;
  bool synthetic = false;
  std::string out_path;
  std::uint64_t seed = 0;
  double lambda = 5.0;
  int epochs = 0;
  int synth_n = 50;
  int synth_frames = 215;
  std::uint64_t synth_seed = 42;
};

struct SampleArgs {
  std::string checkpoint;
  std::string input;
  int t_s = 0;
  int t_e = 0;
  int k = 5;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::int64_t synthetic_seed = -1;
  int k = 5;
  std::uint64_t seed = 0;
  std::string report;
  int synth_n = 10;
  int synth_frames = 215;
};

struct SynthArgs {
  std::string out_dir;
  int n = 10;
  int frames = 215;
  std::uint64_t seed = 0;
  std::string split = "train";
};

struct RenderArgs {
  std::vector<std::string> inputs;
  std::string out_path;
  int stride = 5;
};

mib::Split parse_split(const std::string& s) {
  if (s == "train") return mib::Split::kTrain;
  if (s == "test") return mib::Split::kTest;
  throw std::invalid_argument("--split must be 'train' or 'test', got '" + s + "'");
}

fs::path sibling_with_suffix(const std::string& base, const std::string& suffix) {
  fs::path p(base);
  p.replace_extension();
  p += suffix;
  return p;
}

int run_train(const TrainArgs& a, const CLI::App& cmd) {
  mib::ModelConfig model;
  mib::TrainConfig train;
  if (!a.config_path.empty()) mib::parse_config_file(a.config_path, &model, &train);
  if (cmd.count("--seed") > 0) train.seed = a.seed;
  if (cmd.count("--lambda") > 0) train.lambda = a.lambda;
  if (cmd.count("--epochs") > 0) train.epochs = a.epochs;
  model.validate();
  train.validate();

  mib::Corpus corpus;
  if (a.synthetic) {
    corpus = mib::generate_synthetic_corpus(mib::standard_skeleton17(),
                                            a.synth_n, a.synth_frames,
                                            a.synth_seed, mib::Split::kTrain);
  } else {
    if (!fs::exists(a.data_dir))
      throw mib::DataError(a.data_dir + ": data directory does not exist");
    corpus = mib::load_corpus(a.data_dir, mib::Split::kTrain,
                              model.window_length());
  }

  const fs::path out(a.out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  mib::TrainOptions options;
  options.checkpoint_path = a.out_path;
  options.log_csv_path = sibling_with_suffix(a.out_path, ".loss.csv").string();
  mib::train(corpus, model, train, options);
  std::cout << "checkpoint " << a.out_path << "\n";
  std::cout << "loss_log " << options.log_csv_path << "\n";
  return kExitOk;
}

int run_sample(const SampleArgs& a) {
  if (a.t_s < 1) throw std::invalid_argument("--t-s must be >= 1");
  if (a.t_e - a.t_s < 2)
    throw std::invalid_argument("--t-e must exceed --t-s by at least 2 so the gap is non-empty");
  if (a.k < 1) throw std::invalid_argument("--k must be >= 1");

  const mib::Checkpoint ck = mib::load_checkpoint(a.checkpoint);
  const mib::MotionSequence seq = mib::read_motion_file(a.input);
  if (seq.dim() != ck.config.d)
    throw mib::DataError(a.input + ": pose dimension " +
                         std::to_string(seq.dim()) +
                         " does not match checkpoint d=" +
                         std::to_string(ck.config.d));
  if (a.t_e > seq.length())
    throw mib::DataError(a.input + ": --t-e " + std::to_string(a.t_e) +
                         " exceeds sequence length " +
                         std::to_string(seq.length()));

  const mib::InterpolationTask task = mib::split_sequence(seq, a.t_s, a.t_e);
  const mib::SampleSet set =
      mib::interpolate(ck.params, ck.normalizer, task, a.k, a.seed);

  fs::create_directories(a.out_dir);
  for (int i = 0; i < set.k(); ++i) {
    const mib::MotionSequence full =
        mib::concat_motions(task.start, set.samples[static_cast<std::size_t>(i)],
                            task.end);
    const fs::path path = fs::path(a.out_dir) / ("sample_" + std::to_string(i) + ".motion");
    mib::write_motion_file(path.string(), full);
    std::cout << "sample " << path.string() << "\n";
  }
  return kExitOk;
}

int run_eval(const EvalArgs& a) {
  if (a.k < 2)
    throw std::invalid_argument(
        "--k must be >= 2: the pairwise diversity metric (apd) needs at "
        "least two samples per task");

  const mib::Checkpoint ck = mib::load_checkpoint(a.checkpoint);
  mib::Corpus corpus;
  if (a.synthetic_seed >= 0) {
    corpus = mib::generate_synthetic_corpus(
        mib::standard_skeleton17(), a.synth_n, a.synth_frames,
        static_cast<std::uint64_t>(a.synthetic_seed), mib::Split::kTest);
  } else {
    if (!fs::exists(a.data_dir))
      throw mib::DataError(a.data_dir + ": data directory does not exist");
    corpus = mib::load_corpus(a.data_dir, mib::Split::kTest,
                              ck.config.window_length());
  }

  const mib::EvaluationReport report =
      mib::evaluate(ck.params, ck.normalizer, ck.config, corpus, a.k, a.seed);

  const fs::path rp(a.report);
  if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
  mib::write_report_csv(a.report, report);
  const std::string tasks_path = sibling_with_suffix(a.report, ".tasks.csv").string();
  mib::write_per_task_csv(tasks_path, report);
  std::cout << "ade " << mib::format_double(report.ade) << "\n";
  std::cout << "apd " << mib::format_double(report.apd) << "\n";
  return kExitOk;
}

int run_synth(const SynthArgs& a) {
  const mib::Split split = parse_split(a.split);
  const mib::Corpus corpus = mib::generate_synthetic_corpus(
      mib::standard_skeleton17(), a.n, a.frames, a.seed, split);
  for (const auto& item : corpus.items) {
    const fs::path dir = fs::path(a.out_dir) / item.subject;
    fs::create_directories(dir);
    const fs::path path = dir / (item.subject + "_" + item.action + ".motion");
    mib::write_motion_file(path.string(), item.sequence);
  }
  std::cout << "wrote " << corpus.items.size() << " sequences under "
            << a.out_dir << "\n";
  return kExitOk;
}

int run_render(const RenderArgs& a) {
  if (a.stride < 1) throw std::invalid_argument("--stride must be >= 1");
  std::vector<mib::MotionSequence> sequences;
  std::vector<std::string> labels;
  sequences.reserve(a.inputs.size());
  for (const auto& path : a.inputs) {
    mib::MotionSequence seq = mib::read_motion_file(path);
    if (!sequences.empty() && seq.dim() != sequences.front().dim())
      throw mib::DataError(path + ": pose dimension " +
                           std::to_string(seq.dim()) +
                           " differs from first input's " +
                           std::to_string(sequences.front().dim()));
    sequences.push_back(std::move(seq));
    labels.push_back(fs::path(path).stem().string());
  }
  const fs::path out(a.out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  mib::RenderOptions options;
  options.stride = a.stride;
  mib::render_svg(a.out_path, sequences, labels, options);
  std::cout << "render " << a.out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion in-betweening: train, sample, evaluate, render"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("--config", train_args.config_path, "key = value config file");
  auto* train_data = train_cmd->add_option("--data", train_args.data_dir, "corpus root directory");
  auto* train_synth = train_cmd->add_flag("--synthetic", train_args.synthetic, "train on the built-in synthetic corpus");
  train_cmd->add_option("--out", train_args.out_path, "checkpoint output path")->required();
  train_cmd->add_option("--seed", train_args.seed, "training seed");
  train_cmd->add_option("--lambda", train_args.lambda, "diversity weight");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--synthetic-n", train_args.synth_n, "synthetic sequences");
  train_cmd->add_option("--synthetic-frames", train_args.synth_frames, "frames per synthetic sequence");
  train_cmd->add_option("--synthetic-seed", train_args.synth_seed, "synthetic corpus seed");
  train_data->excludes(train_synth);
  train_synth->excludes(train_data);

  SampleArgs sample_args;
  CLI::App* sample_cmd = app.add_subcommand("sample", "fill a gap of one sequence k ways");
  sample_cmd->add_option("--checkpoint", sample_args.checkpoint, "trained checkpoint")->required();
  sample_cmd->add_option("--input", sample_args.input, "input .motion file")->required();
  sample_cmd->add_option("--t-s", sample_args.t_s, "last kept frame before the gap (1-based)")->required();
  sample_cmd->add_option("--t-e", sample_args.t_e, "first kept frame after the gap (1-based)")->required();
  sample_cmd->add_option("--k", sample_args.k, "number of samples");
  sample_cmd->add_option("--seed", sample_args.seed, "sampling seed");
  sample_cmd->add_option("--out", sample_args.out_dir, "output directory")->required();

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (ade/apd)");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint")->required();
  auto* eval_data = eval_cmd->add_option("--data", eval_args.data_dir, "corpus root directory");
  auto* eval_synth = eval_cmd->add_option("--synthetic-seed", eval_args.synthetic_seed, "evaluate on a synthetic test corpus with this seed");
  eval_cmd->add_option("--k", eval_args.k, "samples per task");
  eval_cmd->add_option("--seed", eval_args.seed, "evaluation seed");
  eval_cmd->add_option("--report", eval_args.report, "report CSV path")->required();
  eval_cmd->add_option("--synthetic-n", eval_args.synth_n, "synthetic sequences");
  eval_cmd->add_option("--synthetic-frames", eval_args.synth_frames, "frames per synthetic sequence");
  eval_data->excludes(eval_synth);
  eval_synth->excludes(eval_data);

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic corpus to disk");
  synth_cmd->add_option("--out", synth_args.out_dir, "output corpus root")->required();
  synth_cmd->add_option("--n", synth_args.n, "number of sequences");
  synth_cmd->add_option("--frames", synth_args.frames, "frames per sequence");
  synth_cmd->add_option("--seed", synth_args.seed, "corpus seed");
  synth_cmd->add_option("--split", synth_args.split, "subject split: train or test");

  RenderArgs render_args;
  CLI::App* render_cmd = app.add_subcommand("render", "draw stick-figure strips to an SVG");
  render_cmd->add_option("--input", render_args.inputs, "input .motion files")->required()->expected(1, -1);
  render_cmd->add_option("--out", render_args.out_path, "output SVG path")->required();
  render_cmd->add_option("--stride", render_args.stride, "draw every stride-th frame");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadFlags;
  }

  try {
    if (train_cmd->parsed()) {
      if (!train_args.synthetic && train_args.data_dir.empty())
        throw std::invalid_argument("train needs a data source: --data DIR or --synthetic");
      return run_train(train_args, *train_cmd);
    }
    if (sample_cmd->parsed()) return run_sample(sample_args);
    if (eval_cmd->parsed()) {
      if (eval_args.synthetic_seed < 0 && eval_args.data_dir.empty())
        throw std::invalid_argument("eval needs a data source: --data DIR or --synthetic-seed N");
      return run_eval(eval_args);
    }
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (render_cmd->parsed()) return run_render(render_args);
    std::cerr << "error: no subcommand\n";
    return kExitBadFlags;
  } catch (const mib::NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonFinite;
  } catch (const mib::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadFlags;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

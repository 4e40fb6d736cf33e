#include "mib/motion.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mib/errors.hpp"
#include "mib/text.hpp"

namespace mib {

void SkeletonSpec::validate() const {
  if (joint_count < 1) throw std::invalid_argument("joint_count must be >= 1");
  if (dims_per_joint < 1) {
    throw std::invalid_argument("dims_per_joint must be >= 1");
  }
  if (static_cast<int>(parent_index.size()) != joint_count) {
    throw std::invalid_argument("parent_index size != joint_count");
  }
  if (!joint_names.empty() &&
      static_cast<int>(joint_names.size()) != joint_count) {
    throw std::invalid_argument("joint_names size != joint_count");
  }
  int roots = 0;
  for (int j = 0; j < joint_count; ++j) {
    const int p = parent_index[j];
    if (p == kRootParent) {
      ++roots;
      continue;
    }
    if (p < 0 || p >= joint_count) {
      throw std::invalid_argument("parent index out of range at joint " +
                                  std::to_string(j));
    }
  }
  if (roots != 1) {
    throw std::invalid_argument("skeleton must have exactly one root, found " +
                                std::to_string(roots));
  }
  // Walking to the root from every joint must terminate: no cycles.
  for (int j = 0; j < joint_count; ++j) {
    int cur = j;
    int steps = 0;
    while (parent_index[cur] != kRootParent) {
      cur = parent_index[cur];
      if (++steps > joint_count) {
        throw std::invalid_argument("parent_index contains a cycle");
      }
    }
  }
}

SkeletonSpec standard_skeleton17() {
  SkeletonSpec s;
  s.joint_count = 17;
  s.dims_per_joint = 3;
  s.joint_names = {"Hip",      "RHip",      "RKnee",  "RAnkle", "LHip",
                   "LKnee",    "LAnkle",    "Spine",  "Thorax", "Neck",
                   "Head",     "LShoulder", "LElbow", "LWrist", "RShoulder",
                   "RElbow",   "RWrist"};
  s.parent_index = {SkeletonSpec::kRootParent,
                    0, 1, 2,     // right leg
                    0, 4, 5,     // left leg
                    0, 7, 8, 9,  // spine to head
                    8, 11, 12,   // left arm
                    8, 14, 15};  // right arm
  s.validate();
  return s;
}

SkeletonSpec chain_skeleton(int joint_count, int dims_per_joint) {
  SkeletonSpec s;
  s.joint_count = joint_count;
  s.dims_per_joint = dims_per_joint;
  s.parent_index.resize(static_cast<size_t>(joint_count));
  s.parent_index[0] = SkeletonSpec::kRootParent;
  for (int j = 1; j < joint_count; ++j) s.parent_index[j] = j - 1;
  s.validate();
  return s;
}

InterpolationTask split_sequence(const MotionSequence& seq, int t_s, int t_e) {
  const int T = seq.length();
  if (t_s < 1 || t_e > T || t_s >= t_e) {
    throw std::invalid_argument("split indices out of range: t_s=" +
                                std::to_string(t_s) + " t_e=" +
                                std::to_string(t_e) + " T=" +
                                std::to_string(T));
  }
  if (t_e - t_s < 2) {
    throw std::invalid_argument("empty gap: t_e - t_s must be >= 2");
  }
  InterpolationTask task;
  task.t_s = t_s;
  task.t_e = t_e;
  task.gap_length = t_e - t_s - 1;
  task.start = MotionSequence{seq.frames.leftCols(t_s), seq.frame_rate_hz};
  task.ground_truth = MotionSequence{
      seq.frames.middleCols(t_s, task.gap_length), seq.frame_rate_hz};
  task.end = MotionSequence{seq.frames.rightCols(T - t_e + 1),
                            seq.frame_rate_hz};
  return task;
}

double pose_distance(const Pose& a, const Pose& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("pose dimension mismatch: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  return (a - b).norm();
}

Eigen::VectorXd flatten_motion(const MotionSequence& seq) {
  if (seq.length() < 1) throw std::invalid_argument("empty sequence");
  // Columns (frames) are contiguous, so reshaping column-major gives the
  // frame-major order: frame 0 dims, frame 1 dims, ...
  Eigen::VectorXd flat(seq.frames.size());
  Eigen::Map<const Eigen::VectorXd> view(seq.frames.data(),
                                         seq.frames.size());
  flat = view;
  return flat;
}

MotionSequence unflatten_motion(const Eigen::VectorXd& flat, int frame_count,
                                int dim, double frame_rate_hz) {
  if (frame_count < 1 || dim < 1 ||
      flat.size() != static_cast<Eigen::Index>(frame_count) * dim) {
    throw std::invalid_argument("flat size does not match frame_count * dim");
  }
  MotionSequence seq;
  seq.frame_rate_hz = frame_rate_hz;
  seq.frames = Eigen::Map<const Eigen::MatrixXd>(flat.data(), dim,
                                                 frame_count);
  return seq;
}

MotionSequence concat_motions(const MotionSequence& start,
                              const MotionSequence& gap,
                              const MotionSequence& end) {
  if (start.dim() != gap.dim() || gap.dim() != end.dim()) {
    throw std::invalid_argument("dimension mismatch in concat_motions");
  }
  MotionSequence out;
  out.frame_rate_hz = start.frame_rate_hz;
  out.frames.resize(start.dim(),
                    start.length() + gap.length() + end.length());
  out.frames << start.frames, gap.frames, end.frames;
  return out;
}

namespace {

[[noreturn]] void parse_error(const std::string& path, int line,
                              const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

MotionSequence read_motion_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open motion file: " + path);

  std::string line;
  if (!std::getline(in, line)) parse_error(path, 1, "missing header");
  const auto header = split_tokens(line);
  if (header.size() != 3) {
    parse_error(path, 1, "header must be 'T d frame_rate'");
  }
  long T = 0;
  long d = 0;
  double rate = 0.0;
  try {
    T = parse_long(header[0]);
    d = parse_long(header[1]);
    rate = parse_double(header[2]);
  } catch (const std::invalid_argument& e) {
    parse_error(path, 1, e.what());
  }
  if (T < 1 || d < 1 || !(rate > 0.0)) {
    parse_error(path, 1, "header values out of range");
  }

  MotionSequence seq;
  seq.frame_rate_hz = rate;
  seq.frames.resize(d, T);
  for (long t = 0; t < T; ++t) {
    if (!std::getline(in, line)) {
      parse_error(path, static_cast<int>(t + 2),
                  "unexpected end of file: expected " + std::to_string(T) +
                      " frames");
    }
    const auto tokens = split_tokens(line);
    if (static_cast<long>(tokens.size()) != d) {
      parse_error(path, static_cast<int>(t + 2),
                  "expected " + std::to_string(d) + " values, found " +
                      std::to_string(tokens.size()));
    }
    for (long i = 0; i < d; ++i) {
      double v = 0.0;
      try {
        v = parse_double(tokens[static_cast<size_t>(i)]);
      } catch (const std::invalid_argument& e) {
        parse_error(path, static_cast<int>(t + 2), e.what());
      }
      if (!std::isfinite(v)) {
        parse_error(path, static_cast<int>(t + 2), "non-finite value");
      }
      seq.frames(i, t) = v;
    }
  }
  long extra_line = T + 2;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      parse_error(path, static_cast<int>(extra_line),
                  "trailing content after " + std::to_string(T) + " frames");
    }
    ++extra_line;
  }
  return seq;
}

void write_motion_file(const std::string& path, const MotionSequence& seq) {
  if (seq.length() < 1 || seq.dim() < 1) {
    throw std::invalid_argument("refusing to write empty sequence");
  }
  if (!seq.frames.allFinite()) {
    throw std::invalid_argument("refusing to write non-finite sequence");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << seq.length() << ' ' << seq.dim() << ' '
      << format_double(seq.frame_rate_hz) << '\n';
  for (int t = 0; t < seq.length(); ++t) {
    for (int i = 0; i < seq.dim(); ++i) {
      if (i > 0) out << ' ';
      out << format_double(seq.frames(i, t));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace mib

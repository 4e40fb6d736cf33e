#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace mib {

using Pose = Eigen::VectorXd;

// Joint tree plus per-joint dimensionality. The flat pose dimension is
// d = joint_count * dims_per_joint.
struct SkeletonSpec {
  static constexpr int kRootParent = -1;

  int joint_count = 0;
  int dims_per_joint = 3;
  std::vector<std::string> joint_names;
  std::vector<int> parent_index;  // kRootParent marks the single root

  int dim() const { return joint_count * dims_per_joint; }

  // Throws std::invalid_argument unless parent_index is a tree with
  // exactly one root and sizes are consistent.
  void validate() const;
};

// The 17-joint, 3-dims-per-joint skeleton (d = 51). Joint 0 is the hip
// root; its three dims carry the root trajectory, all other joints are
// root-relative offsets.
SkeletonSpec standard_skeleton17();

// Degenerate chain skeleton: joint i hangs off joint i-1. Used for tiny
// configurations and for rendering files whose dimension is not 51.
SkeletonSpec chain_skeleton(int joint_count, int dims_per_joint);

// Fixed-rate pose track. Frames are columns: frames(i, t) is dimension i
// at frame t. Treated as immutable after construction.
struct MotionSequence {
  Eigen::MatrixXd frames;  // d x T
  double frame_rate_hz = 50.0;

  int length() const { return static_cast<int>(frames.cols()); }
  int dim() const { return static_cast<int>(frames.rows()); }
  Pose pose(int t) const { return frames.col(t); }
};

// One interpolation query: fill gap_length frames between start and end.
// t_s and t_e are 1-based frame indices into the source sequence (start
// covers frames 1..t_s, end covers t_e..T), matching the file format.
struct InterpolationTask {
  MotionSequence start;
  MotionSequence end;
  int gap_length = 0;
  std::optional<MotionSequence> ground_truth;
  int t_s = 0;
  int t_e = 0;
};

// Cuts seq into start = frames 1..t_s, ground truth = t_s+1..t_e-1 and
// end = t_e..T (1-based). Requires 1 <= t_s < t_e <= T and t_e - t_s >= 2;
// throws std::invalid_argument otherwise.
InterpolationTask split_sequence(const MotionSequence& seq, int t_s, int t_e);

// L2 distance between two poses of equal dimension.
double pose_distance(const Pose& a, const Pose& b);

// Frame-major concatenation of all frames into one vector of length T*d.
Eigen::VectorXd flatten_motion(const MotionSequence& seq);

// Inverse of flatten_motion given the original shape.
MotionSequence unflatten_motion(const Eigen::VectorXd& flat, int frame_count,
                                int dim, double frame_rate_hz);

// start | gap | end stitched back into one sequence.
MotionSequence concat_motions(const MotionSequence& start,
                              const MotionSequence& gap,
                              const MotionSequence& end);

// Line-oriented text format:
//   line 1:      T d frame_rate
//   lines 2..T+1: d space-separated floats (shortest round-trip form)
// Writing a sequence and reading it back is bit-exact. Parse errors report
// the file and 1-based line number; throws DataError.
MotionSequence read_motion_file(const std::string& path);
void write_motion_file(const std::string& path, const MotionSequence& seq);

}  // namespace mib

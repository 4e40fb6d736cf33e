#pragma once

#include <string>
#include <vector>

#include "mib/motion.hpp"

namespace mib {

struct RenderOptions {
  int stride = 5;             // draw every stride-th frame
  double cell_px = 160.0;     // square cell per drawn frame
  double margin_px = 12.0;
};

// Picks the skeleton a flat pose vector most plausibly carries: the
// 17-joint body when the dimension matches it (offsets stored relative to
// the root joint), otherwise a simple chain of 3d joints.
SkeletonSpec infer_skeleton(int dim);

// Absolute 3d joint positions for one pose under the inferred convention.
// Rows are joints, columns x/y/z.
Eigen::MatrixXd absolute_joints(const SkeletonSpec& spec, const Pose& pose);

// Stick-figure strip: one row per sequence, every stride-th frame drawn.
// Bones follow the skeleton's parent links; each row is centered and
// scaled independently so differently sized motions stay readable.
void render_svg(const std::string& path,
                const std::vector<MotionSequence>& sequences,
                const std::vector<std::string>& labels,
                const RenderOptions& options = {});

}  // namespace mib

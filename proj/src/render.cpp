#include "mib/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mib/errors.hpp"
#include "mib/text.hpp"

namespace mib {

SkeletonSpec infer_skeleton(int dim) {
  const SkeletonSpec body = standard_skeleton17();
  if (dim == body.dim()) return body;
  if (dim < 3 || dim % 3 != 0)
    throw DataError("cannot render pose dimension " + std::to_string(dim) +
                    ": expected " + std::to_string(body.dim()) +
                    " or a multiple of 3");
  return chain_skeleton(dim / 3, 3);
}

Eigen::MatrixXd absolute_joints(const SkeletonSpec& spec, const Pose& pose) {
  if (pose.size() != spec.dim())
    throw std::invalid_argument("pose dimension does not match skeleton");
  Eigen::MatrixXd joints(spec.joint_count, 3);
  const bool root_relative = spec.joint_count == 17 && spec.dims_per_joint == 3;
  const Eigen::Vector3d root = pose.segment(0, 3);
  for (int j = 0; j < spec.joint_count; ++j) {
    Eigen::Vector3d p = pose.segment(3 * j, 3);
    if (root_relative && j > 0) p += root;
    joints.row(j) = p.transpose();
  }
  return joints;
}

namespace {

struct Point {
  double x, y;
};

// Orthographic side view: world x runs right, world y runs up (flipped
// into SVG's downward y axis by the caller).
Point project(const Eigen::MatrixXd& joints, int j) {
  return Point{joints(j, 0), joints(j, 1)};
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void render_svg(const std::string& path,
                const std::vector<MotionSequence>& sequences,
                const std::vector<std::string>& labels,
                const RenderOptions& options) {
  if (sequences.empty()) throw std::invalid_argument("nothing to render");
  if (labels.size() != sequences.size())
    throw std::invalid_argument("one label per sequence required");
  if (options.stride < 1) throw std::invalid_argument("stride must be >= 1");

  struct Row {
    SkeletonSpec spec;
    std::vector<Eigen::MatrixXd> frames;  // absolute joints, one per drawn frame
    double extent = 1e-6;
  };
  std::vector<Row> rows;
  rows.reserve(sequences.size());
  std::size_t max_cells = 0;
  for (const auto& seq : sequences) {
    if (seq.length() < 1) throw DataError("cannot render an empty sequence");
    Row row;
    row.spec = infer_skeleton(seq.dim());
    for (int t = 0; t < seq.length(); t += options.stride) {
      Eigen::MatrixXd joints = absolute_joints(row.spec, seq.pose(t));
      // Center the figure on its centroid in the projection plane.
      const double cx = joints.col(0).mean();
      const double cy = joints.col(1).mean();
      joints.col(0).array() -= cx;
      joints.col(1).array() -= cy;
      row.extent = std::max(row.extent,
                            std::max(joints.col(0).cwiseAbs().maxCoeff(),
                                     joints.col(1).cwiseAbs().maxCoeff()));
      row.frames.push_back(std::move(joints));
    }
    max_cells = std::max(max_cells, row.frames.size());
    rows.push_back(std::move(row));
  }

  const double cell = options.cell_px;
  const double margin = options.margin_px;
  const double label_h = 16.0;
  const double row_h = cell + label_h + margin;
  const double width = margin * 2 + cell * static_cast<double>(max_cells);
  const double height = margin + row_h * static_cast<double>(rows.size());

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << format_double(width) << "\" height=\"" << format_double(height)
      << "\" viewBox=\"0 0 " << format_double(width) << " "
      << format_double(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Row& row = rows[r];
    const double top = margin + row_h * static_cast<double>(r);
    out << "<text x=\"" << format_double(margin) << "\" y=\""
        << format_double(top + 12.0) << "\" font-family=\"monospace\" "
           "font-size=\"12\" fill=\"#333333\">" << xml_escape(labels[r])
        << "</text>\n";
    const double scale = (cell / 2.0 - 6.0) / row.extent;
    for (std::size_t c = 0; c < row.frames.size(); ++c) {
      const Eigen::MatrixXd& joints = row.frames[c];
      const double ox = margin + cell * static_cast<double>(c) + cell / 2.0;
      const double oy = top + label_h + cell / 2.0;
      const auto to_svg = [&](const Point& p) {
        return Point{ox + scale * p.x, oy - scale * p.y};
      };
      for (int j = 0; j < row.spec.joint_count; ++j) {
        const int parent = row.spec.parent_index[static_cast<std::size_t>(j)];
        if (parent == SkeletonSpec::kRootParent) continue;
        const Point a = to_svg(project(joints, j));
        const Point b = to_svg(project(joints, parent));
        out << "<line x1=\"" << format_double(a.x) << "\" y1=\""
            << format_double(a.y) << "\" x2=\"" << format_double(b.x)
            << "\" y2=\"" << format_double(b.y)
            << "\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
      }
      for (int j = 0; j < row.spec.joint_count; ++j) {
        const Point p = to_svg(project(joints, j));
        out << "<circle cx=\"" << format_double(p.x) << "\" cy=\""
            << format_double(p.y) << "\" r=\"2\" fill=\"#d62728\"/>\n";
      }
    }
  }
  out << "</svg>\n";
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace mib

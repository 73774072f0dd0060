#pragma once

#include <Eigen/Dense>
#include <vector>

namespace thinlayer {

enum class FaceKind { Interior, Lateral, Top, Bottom };

// Structured cells on omega x (0,1). Cell (i,j,k) has linear index (k*ny + j)*nx + i.
// The horizontal domain is the box [x0, x0+nx*hx] x [y0, y0+ny*hy]; mask marks columns inside omega.
struct LayerGrid {
  int nx = 0, ny = 0, nz = 1;
  double x0 = -0.5, y0 = -0.5;
  double hx = 0, hy = 0, hz = 1;
  double eps = 1.0;
  std::vector<char> mask;  // per column, size nx*ny

  static LayerGrid unit_square(int nx, int ny, int nz, double eps);
  // Columns whose centre lies in the disk of the given radius about the origin; box [-radius, radius]^2.
  static LayerGrid disk(int n, int nz, double eps, double radius = 1.0);

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  // Same horizontal layout with one vertical cell; the trace on omega.
  LayerGrid planar() const;
  LayerGrid with_eps(double e) const;

  int num_columns() const { return nx * ny; }
  int num_cells() const { return nx * ny * nz; }
  int column(int i, int j) const { return j * nx + i; }
  int index(int i, int j, int k) const { return (k * ny + j) * nx + i; }
  bool inside(int i, int j) const {
    return i >= 0 && j >= 0 && i < nx && j < ny && mask[column(i, j)] != 0;
  }
  double xc(int i) const { return x0 + (i + 0.5) * hx; }
  double yc(int j) const { return y0 + (j + 0.5) * hy; }
  double zc(int k) const { return (k + 0.5) * hz; }
  double cell_volume() const { return hx * hy * hz; }
  double column_area() const { return hx * hy; }
  // Largest of hx, hy and the physical vertical size eps*hz.
  double h_max() const;
  int active_columns() const;

  // Kind of the face on side s (0 low, 1 high) of cell (i,j,k) along axis d (0,1,2).
  FaceKind face_kind(int i, int j, int k, int d, int s) const;

  // Column-wise mask broadcast to all cells, as 0/1 weights.
  Eigen::ArrayXd cell_weights() const;
  Eigen::ArrayXd column_weights() const;
};

struct FluidState3 {
  Eigen::ArrayXd rho;
  Eigen::ArrayX3d u;

  static FluidState3 zeros(const LayerGrid& g);
};

struct FluidState2 {
  Eigen::ArrayXd r;
  Eigen::ArrayX2d w;

  static FluidState2 zeros(const LayerGrid& g);
};

// Integral over Omega of a per-cell field, with mask.
double integrate3(const LayerGrid& g, const Eigen::ArrayXd& f);
// Integral over omega of a per-column field, with mask.
double integrate2(const LayerGrid& g, const Eigen::ArrayXd& f);

// Column average of a per-cell field.
Eigen::ArrayXd column_average(const LayerGrid& g, const Eigen::ArrayXd& f);
// Constant-in-x3 broadcast of a per-column field.
Eigen::ArrayXd extrude(const LayerGrid& g, const Eigen::ArrayXd& f);

}  // namespace thinlayer

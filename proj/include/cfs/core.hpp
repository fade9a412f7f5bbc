#pragma once

#include <Eigen/Dense>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfs {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Exit-code aware error hierarchy. The CLI maps code() to the process status.
class Error : public std::runtime_error {
public:
  Error(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

private:
  int code_;
};

struct Refusal : Error {
  explicit Refusal(const std::string& w) : Error(2, w) {}
};
struct NumericalFailure : Error {
  explicit NumericalFailure(const std::string& w) : Error(3, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(4, w) {}
};

struct SpaceSpec {
  int dim_f = 2;
  int dim_hf = 2;
  int n = 1;
  double c = 1.0;  // local trace

  void validate() const;
};

// Rank-2n operator x = F D F*, F orthonormal f x 2n, D = diag(nu_1..nu_n, -mu_1..-mu_n).
class Point {
public:
  Point() = default;
  Point(Mat frame, RVec spectrum);

  const Mat& frame() const { return frame_; }
  const RVec& spectrum() const { return spec_; }
  int n() const { return static_cast<int>(spec_.size()) / 2; }
  int dim_f() const { return static_cast<int>(frame_.rows()); }
  int spin_dim() const { return static_cast<int>(spec_.size()); }

  double local_trace() const { return spec_.sum(); }
  Mat op() const;
  // spin metric G_x = -D_x as a diagonal
  RVec metric() const { return -spec_; }
  RVec abs_spectrum() const { return spec_.cwiseAbs(); }

private:
  Mat frame_;
  RVec spec_;
};

Point make_point(const Mat& frame, const RVec& spectrum, double c);

// Keep the n largest positive and n most negative eigenpairs of a Hermitian f x f matrix.
Point project_rank(const Mat& op, int n);

Point conjugate(const Point& x, const Mat& U);

// P(x,y) = pi_x y restricted to S_y, as a 2n x 2n block in the two frames.
Mat p_block(const Point& x, const Point& y);
// Closed chain P(x,y) P(y,x).
Mat closed_chain(const Point& x, const Point& y);

// Sorted by descending modulus, ties by argument.
Vec sort_spectrum(Vec ev);
Vec product_spectrum(const Point& x, const Point& y);

double lagrangian(const Vec& ev, int n);
double spectral_weight(const Vec& ev);
double lagrangian_kappa(const Vec& ev, int n, double kappa);
double lagrangian_kappa(const Point& x, const Point& y, double kappa);

enum class Causal { spacelike, timelike, lightlike };
Causal causal_classify(const Vec& ev, double tol = 1e-9);
std::string to_string(Causal c);

cplx spin_product(const Point& x, const Vec& u, const Vec& v);
double spin_norm(const Point& x, const Vec& u);
Mat euclidean_sign(const Point& x);

// random helpers, deterministic given the engine
Mat random_gaussian(int rows, int cols, Rng& rng);
Mat random_unitary(int f, Rng& rng);
Mat random_hermitian(int f, Rng& rng);
Mat random_frame(int f, int k, Rng& rng);
// spectrum with n entries in [lo,hi] and n entries in [-hi,-lo], rescaled to trace c
Point random_point(const SpaceSpec& s, Rng& rng, double lo = 0.5, double hi = 2.0);

}  // namespace cfs

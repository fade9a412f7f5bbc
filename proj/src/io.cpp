#include "cfs/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cfs {

namespace {

[[noreturn]] void schema(const std::string& ptr, const std::string& what) {
  throw IoError((ptr.empty() ? std::string("/") : ptr) + ": " + what);
}

const Json& array_at(const Json& j, const std::string& ptr) {
  if (!j.is_array()) schema(ptr, "expected an array");
  return j;
}

std::string idx(const std::string& ptr, size_t i) { return ptr + "/" + std::to_string(i); }

}  // namespace

const Json& field(const Json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) schema(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema(ptr + "/" + key, "missing");
  return *it;
}

bool has(const Json& j, const std::string& key) { return j.is_object() && j.contains(key); }

double get_double(const Json& j, const std::string& ptr) {
  if (!j.is_number()) schema(ptr, "expected a number");
  return j.get<double>();
}

int get_int(const Json& j, const std::string& ptr) {
  if (!j.is_number_integer()) schema(ptr, "expected an integer");
  return j.get<int>();
}

std::string get_string(const Json& j, const std::string& ptr) {
  if (!j.is_string()) schema(ptr, "expected a string");
  return j.get<std::string>();
}

std::vector<int> get_ints(const Json& j, const std::string& ptr) {
  std::vector<int> out;
  for (size_t i = 0; i < array_at(j, ptr).size(); ++i) out.push_back(get_int(j[i], idx(ptr, i)));
  return out;
}

std::vector<double> get_doubles(const Json& j, const std::string& ptr) {
  std::vector<double> out;
  for (size_t i = 0; i < array_at(j, ptr).size(); ++i) out.push_back(get_double(j[i], idx(ptr, i)));
  return out;
}

Json to_json(cplx z) { return Json::array({z.real(), z.imag()}); }

Json to_json(const Vec& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(to_json(v(i)));
  return j;
}

Json to_json(const RVec& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Json to_json(const Mat& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vec(m.row(r).transpose())));
  return j;
}

Json to_json(const RMat& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(RVec(m.row(r).transpose())));
  return j;
}

cplx cplx_from_json(const Json& j, const std::string& ptr) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2) schema(ptr, "expected [re, im]");
  return {get_double(j[0], ptr + "/0"), get_double(j[1], ptr + "/1")};
}

Vec vec_from_json(const Json& j, const std::string& ptr) {
  Vec v(static_cast<Eigen::Index>(array_at(j, ptr).size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = cplx_from_json(j[i], idx(ptr, i));
  return v;
}

RVec rvec_from_json(const Json& j, const std::string& ptr) {
  const std::vector<double> d = get_doubles(j, ptr);
  return Eigen::Map<const RVec>(d.data(), static_cast<Eigen::Index>(d.size()));
}

Mat mat_from_json(const Json& j, const std::string& ptr) {
  const size_t rows = array_at(j, ptr).size();
  if (rows == 0) return Mat(0, 0);
  const size_t cols = array_at(j[0], ptr + "/0").size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r) {
    const Vec row = vec_from_json(j[r], idx(ptr, r));
    if (static_cast<size_t>(row.size()) != cols) schema(idx(ptr, r), "ragged matrix row");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

RMat rmat_from_json(const Json& j, const std::string& ptr) {
  const size_t rows = array_at(j, ptr).size();
  if (rows == 0) return RMat(0, 0);
  const size_t cols = array_at(j[0], ptr + "/0").size();
  RMat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r) {
    const RVec row = rvec_from_json(j[r], idx(ptr, r));
    if (static_cast<size_t>(row.size()) != cols) schema(idx(ptr, r), "ragged matrix row");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json to_json(const SpaceSpec& s) {
  return Json{{"dim_f", s.dim_f}, {"dim_hf", s.dim_hf}, {"n", s.n}, {"c", s.c}};
}

SpaceSpec space_from_json(const Json& j, const std::string& ptr) {
  SpaceSpec s;
  s.dim_f = get_int(field(j, "dim_f", ptr), ptr + "/dim_f");
  s.dim_hf = get_int(field(j, "dim_hf", ptr), ptr + "/dim_hf");
  s.n = get_int(field(j, "n", ptr), ptr + "/n");
  s.c = get_double(field(j, "c", ptr), ptr + "/c");
  return s;
}

Json to_json(const Measure& rho) {
  Json pts = Json::array();
  for (const Point& p : rho.points) pts.push_back(Json{{"frame", to_json(p.frame())}, {"spectrum", to_json(p.spectrum())}});
  return Json{{"space", to_json(rho.space)}, {"points", pts}, {"weights", rho.weights}, {"hf", to_json(rho.hf)}};
}

Measure measure_from_json(const Json& j, const std::string& ptr) {
  Measure rho;
  rho.space = space_from_json(field(j, "space", ptr), ptr + "/space");
  const Json& pts = array_at(field(j, "points", ptr), ptr + "/points");
  for (size_t i = 0; i < pts.size(); ++i) {
    const std::string p = idx(ptr + "/points", i);
    Mat frame = mat_from_json(field(pts[i], "frame", p), p + "/frame");
    RVec spec = rvec_from_json(field(pts[i], "spectrum", p), p + "/spectrum");
    try {
      rho.points.emplace_back(std::move(frame), std::move(spec));
    } catch (const Error& e) {
      schema(p, e.what());
    }
  }
  rho.weights = get_doubles(field(j, "weights", ptr), ptr + "/weights");
  rho.hf = has(j, "hf") ? mat_from_json(j["hf"], ptr + "/hf") : default_hf(rho.space);
  try {
    rho.validate();
  } catch (const Error& e) {
    schema(ptr, e.what());
  }
  return rho;
}

Json to_json(const BlockKernel& k) {
  Json blocks = Json::object();
  for (int i = 0; i < k.npoints; ++i)
    for (int j = 0; j < k.npoints; ++j)
      if (k.at(i, j).squaredNorm() > 0) blocks[std::to_string(i) + "," + std::to_string(j)] = to_json(k.at(i, j));
  return Json{{"npoints", k.npoints}, {"spin", k.spin}, {"kind", to_string(k.kind)}, {"blocks", blocks}};
}

BlockKernel kernel_from_json(const Json& j, const std::string& ptr) {
  const int N = get_int(field(j, "npoints", ptr), ptr + "/npoints");
  const int s = get_int(field(j, "spin", ptr), ptr + "/spin");
  if (N <= 0 || s <= 0) schema(ptr, "npoints and spin must be positive");
  const std::string kname = get_string(field(j, "kind", ptr), ptr + "/kind");
  KernelKind kind;
  try {
    kind = kernel_kind_from_string(kname);
  } catch (const Error& e) {
    schema(ptr + "/kind", e.what());
  }
  BlockKernel k(N, s, kind);
  const Json& blocks = field(j, "blocks", ptr);
  if (!blocks.is_object()) schema(ptr + "/blocks", "expected an object");
  for (auto it = blocks.begin(); it != blocks.end(); ++it) {
    const std::string p = ptr + "/blocks/" + it.key();
    int a = -1, b = -1;
    char tail = 0;
    if (std::sscanf(it.key().c_str(), "%d,%d%c", &a, &b, &tail) != 2 || a < 0 || b < 0 || a >= N || b >= N)
      schema(p, "block key must be \"i,j\" with indices below npoints");
    const Mat m = mat_from_json(it.value(), p);
    if (m.rows() != s || m.cols() != s) schema(p, "block has the wrong size");
    k.at(a, b) = m;
  }
  return k;
}

Json to_json(const Foliation& f) {
  return Json{{"t_grid", to_json(f.t)}, {"eta", to_json(f.eta)}, {"theta", to_json(f.theta)}};
}

Foliation foliation_from_json(const Json& j, const std::string& ptr) {
  const RVec t = rvec_from_json(field(j, "t_grid", ptr), ptr + "/t_grid");
  const RMat eta = rmat_from_json(field(j, "eta", ptr), ptr + "/eta");
  if (eta.rows() != t.size()) schema(ptr + "/eta", "needs one row per time step");
  if (!has(j, "theta")) {
    try {
      return foliation_from_eta(t, eta);
    } catch (const Error& e) {
      schema(ptr, e.what());
    }
  }
  Foliation f;
  f.t = t;
  f.eta = eta;
  f.theta = rmat_from_json(j["theta"], ptr + "/theta");
  if (f.theta.rows() != eta.rows() || f.theta.cols() != eta.cols()) schema(ptr + "/theta", "shape differs from eta");
  return f;
}

Json to_json(const DynSpace& sp) {
  Json metric = Json::array();
  for (const RVec& g : sp.metric) metric.push_back(to_json(g));
  return Json{{"spin", sp.spin}, {"weights", to_json(sp.weights)}, {"metric", metric}, {"layer", sp.layer}, {"site", sp.site}};
}

DynSpace dynspace_from_json(const Json& j, const std::string& ptr) {
  DynSpace sp;
  sp.spin = get_int(field(j, "spin", ptr), ptr + "/spin");
  sp.weights = rvec_from_json(field(j, "weights", ptr), ptr + "/weights");
  const Json& m = array_at(field(j, "metric", ptr), ptr + "/metric");
  for (size_t i = 0; i < m.size(); ++i) sp.metric.push_back(rvec_from_json(m[i], idx(ptr + "/metric", i)));
  sp.layer = get_ints(field(j, "layer", ptr), ptr + "/layer");
  if (has(j, "site")) sp.site = get_ints(j["site"], ptr + "/site");
  try {
    sp.validate();
  } catch (const Error& e) {
    schema(ptr, e.what());
  }
  return sp;
}

Region region_from_json(const Json& j, int npoints, const std::string& ptr) {
  const std::vector<int> ids = get_ints(j, ptr);
  for (size_t i = 0; i < ids.size(); ++i)
    if (ids[i] < 0 || ids[i] >= npoints) schema(idx(ptr, i), "point index out of range");
  return region_from_indices(npoints, ids);
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot write");
  out << text;
  if (!out) throw IoError(path + ": write failed");
}

void write_json(const std::string& path, const Json& j) { write_text(path, dump(j)); }

std::string Csv::str() const {
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  char buf[64];
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      os << (i ? "," : "") << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace cfs

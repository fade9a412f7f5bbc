#pragma once

#include "cfs/dynamics.hpp"
#include "cfs/extension.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace cfs {

using Json = nlohmann::json;

// Schema access with JSON-pointer paths in the error messages (IoError, exit code 4).
const Json& field(const Json& j, const std::string& key, const std::string& ptr);
bool has(const Json& j, const std::string& key);
double get_double(const Json& j, const std::string& ptr);
int get_int(const Json& j, const std::string& ptr);
std::string get_string(const Json& j, const std::string& ptr);
std::vector<int> get_ints(const Json& j, const std::string& ptr);
std::vector<double> get_doubles(const Json& j, const std::string& ptr);

// Complex numbers as [re, im]; matrices as arrays of rows.
Json to_json(cplx z);
Json to_json(const Vec& v);
Json to_json(const RVec& v);
Json to_json(const Mat& m);
Json to_json(const RMat& m);
cplx cplx_from_json(const Json& j, const std::string& ptr);
Vec vec_from_json(const Json& j, const std::string& ptr);
RVec rvec_from_json(const Json& j, const std::string& ptr);
Mat mat_from_json(const Json& j, const std::string& ptr);
RMat rmat_from_json(const Json& j, const std::string& ptr);

Json to_json(const SpaceSpec& s);
SpaceSpec space_from_json(const Json& j, const std::string& ptr);
Json to_json(const Measure& rho);
Measure measure_from_json(const Json& j, const std::string& ptr = "");
// Blocks keyed "i,j"; zero blocks are omitted.
Json to_json(const BlockKernel& k);
BlockKernel kernel_from_json(const Json& j, const std::string& ptr = "");
// {t_grid, eta, theta}; theta is recomputed from eta when absent.
Json to_json(const Foliation& f);
Foliation foliation_from_json(const Json& j, const std::string& ptr = "");
Json to_json(const DynSpace& sp);
DynSpace dynspace_from_json(const Json& j, const std::string& ptr = "");
Region region_from_json(const Json& j, int npoints, const std::string& ptr);

Json read_json(const std::string& path);
std::string dump(const Json& j);
void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const Json& j);

// CSV with a header row; doubles printed with 17 significant digits.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::string str() const;
};

}  // namespace cfs

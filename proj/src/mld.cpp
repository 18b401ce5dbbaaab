#include "rlmpc/mld.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rlmpc {

namespace {

void check_shape(std::vector<ValidationIssue>& issues, const char* name,
                 const Matrix& m, Index rows, Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << "expected " << rows << "x" << cols << ", got " << m.rows() << "x"
       << m.cols();
    issues.push_back({name, os.str()});
  } else if (!all_finite(m)) {
    issues.push_back({name, "contains a non-finite entry"});
  }
}

void check_shape(std::vector<ValidationIssue>& issues, const char* name,
                 const Vector& v, Index len) {
  if (v.size() != len) {
    std::ostringstream os;
    os << "expected length " << len << ", got " << v.size();
    issues.push_back({name, os.str()});
  } else if (!all_finite(v)) {
    issues.push_back({name, "contains a non-finite entry"});
  }
}

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

std::string ValidationReport::to_string() const {
  if (ok()) return "OK";
  std::ostringstream os;
  for (const auto& issue : issues) os << issue.field << ": " << issue.message << "\n";
  return os.str();
}

ValidationReport validate(const MldSystem& system) {
  ValidationReport report;
  const MldDims& d = system.dims;
  if (d.n_c < 0 || d.n_d < 0 || d.m_c < 0 || d.m_d < 0 || d.r_c < 0 || d.r_d < 0)
    report.issues.push_back({"dims", "negative count"});
  if (d.n() < 1) report.issues.push_back({"dims", "n_c + n_d must be >= 1"});
  if (!report.ok()) return report;

  const Index n = d.n(), m = d.m();
  const Index q = system.E5.size();
  check_shape(report.issues, "A", system.A, n, n);
  check_shape(report.issues, "B1", system.B1, n, d.m());
  check_shape(report.issues, "B2", system.B2, n, d.r_d);
  check_shape(report.issues, "B3", system.B3, n, d.r_c);
  check_shape(report.issues, "B5", system.B5, n);
  check_shape(report.issues, "E1", system.E1, q, m);
  check_shape(report.issues, "E2", system.E2, q, d.r_d);
  check_shape(report.issues, "E3", system.E3, q, d.r_c);
  check_shape(report.issues, "E4", system.E4, q, n);
  check_shape(report.issues, "E5", system.E5, q);
  return report;
}

Vector step(const MldSystem& system, const Vector& x, const MldStep& s) {
  const MldDims& d = system.dims;
  if (x.size() != d.n()) throw std::invalid_argument("step: state length mismatch");
  if (s.u.size() != d.m()) throw std::invalid_argument("step: input length mismatch");
  if (s.delta.size() != d.r_d) throw std::invalid_argument("step: delta length mismatch");
  if (s.z.size() != d.r_c) throw std::invalid_argument("step: z length mismatch");
  for (Index i = d.m_c; i < d.m(); ++i)
    if (!is_binary(s.u[i]))
      throw std::invalid_argument("step: discrete input coordinate not in {0,1}");
  for (Index i = 0; i < d.r_d; ++i)
    if (!is_binary(s.delta[i]))
      throw std::invalid_argument("step: delta coordinate not in {0,1}");

  Vector next = system.A * x + system.B5;
  if (d.m() > 0) next += system.B1 * s.u;
  if (d.r_d > 0) next += system.B2 * s.delta;
  if (d.r_c > 0) next += system.B3 * s.z;
  return next;
}

ConstraintCheck check_constraints(const MldSystem& system, const Vector& x,
                                  const MldStep& s, double tol) {
  const Index q = system.rows();
  ConstraintCheck out;
  if (q == 0) {
    out.satisfied = true;
    return out;
  }
  Vector residual = -system.E5;
  residual -= system.E4 * x;
  if (system.dims.m() > 0) residual -= system.E1 * s.u;
  if (system.dims.r_d > 0) residual += system.E2 * s.delta;
  if (system.dims.r_c > 0) residual += system.E3 * s.z;
  out.max_residual = residual.maxCoeff(&out.worst_row);
  out.satisfied = out.max_residual <= tol;
  return out;
}

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Matrix matrix_from_json(const json& j, const char* name) {
  if (!j.is_array()) throw std::runtime_error(std::string(name) + ": expected array of rows");
  const Index rows = static_cast<Index>(j.size());
  Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<size_t>(i));
    if (static_cast<Index>(row.size()) != cols)
      throw std::runtime_error(std::string(name) + ": ragged rows");
    for (Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<size_t>(c)).get<double>();
  }
  return m;
}

Vector vector_from_json(const json& j, const char* name) {
  if (!j.is_array()) throw std::runtime_error(std::string(name) + ": expected array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<size_t>(i)).get<double>();
  return v;
}

}  // namespace

std::string mld_system_to_json(const MldSystem& system) {
  json j;
  j["dims"] = {{"n_c", system.dims.n_c}, {"n_d", system.dims.n_d},
               {"m_c", system.dims.m_c}, {"m_d", system.dims.m_d},
               {"r_c", system.dims.r_c}, {"r_d", system.dims.r_d}};
  j["A"] = matrix_to_json(system.A);
  j["B1"] = matrix_to_json(system.B1);
  j["B2"] = matrix_to_json(system.B2);
  j["B3"] = matrix_to_json(system.B3);
  j["B5"] = vector_to_json(system.B5);
  j["E1"] = matrix_to_json(system.E1);
  j["E2"] = matrix_to_json(system.E2);
  j["E3"] = matrix_to_json(system.E3);
  j["E4"] = matrix_to_json(system.E4);
  j["E5"] = vector_to_json(system.E5);
  return j.dump(2);
}

MldSystem mld_system_from_json(const std::string& text) {
  json j = json::parse(text);
  MldSystem s;
  const json& d = j.at("dims");
  s.dims.n_c = d.at("n_c").get<int>();
  s.dims.n_d = d.at("n_d").get<int>();
  s.dims.m_c = d.at("m_c").get<int>();
  s.dims.m_d = d.at("m_d").get<int>();
  s.dims.r_c = d.at("r_c").get<int>();
  s.dims.r_d = d.at("r_d").get<int>();
  s.A = matrix_from_json(j.at("A"), "A");
  s.B1 = matrix_from_json(j.at("B1"), "B1");
  s.B2 = matrix_from_json(j.at("B2"), "B2");
  s.B3 = matrix_from_json(j.at("B3"), "B3");
  s.B5 = vector_from_json(j.at("B5"), "B5");
  s.E1 = matrix_from_json(j.at("E1"), "E1");
  s.E2 = matrix_from_json(j.at("E2"), "E2");
  s.E3 = matrix_from_json(j.at("E3"), "E3");
  s.E4 = matrix_from_json(j.at("E4"), "E4");
  s.E5 = vector_from_json(j.at("E5"), "E5");
  // an empty JSON array carries no column count; restore it from dims
  const Index q = s.E5.size();
  auto conform = [](Matrix& m, Index rows, Index cols) {
    if (m.rows() == 0 && rows == 0) m.resize(0, cols);
  };
  conform(s.E1, q, s.dims.m());
  conform(s.E2, q, s.dims.r_d);
  conform(s.E3, q, s.dims.r_c);
  conform(s.E4, q, s.dims.n());
  ValidationReport report = validate(s);
  if (!report.ok()) throw std::runtime_error("invalid MLD system: " + report.to_string());
  return s;
}

void save_mld_system(const MldSystem& system, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << mld_system_to_json(system) << "\n";
}

MldSystem load_mld_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return mld_system_from_json(buf.str());
}

}  // namespace rlmpc

#include "lsot/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace lsot::io {

namespace {

bool is_scalar_array(const json& value) {
  if (!value.is_array()) return false;
  for (const auto& v : value)
    if (v.is_structured()) return false;
  return true;
}

void write_scalar(std::ostream& os, const json& value) {
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (std::isfinite(d))
      os << format_real(d);
    else
      os << "null";
  } else {
    os << value.dump();
  }
}

void write_value(std::ostream& os, const json& value, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
  const char* nl = indent > 0 ? "\n" : "";
  if (value.is_object()) {
    if (value.empty()) {
      os << "{}";
      return;
    }
    os << '{' << nl;
    bool first = true;
    for (auto it = value.begin(); it != value.end(); ++it) {
      if (!first) os << ',' << nl;
      first = false;
      os << pad << json(it.key()).dump() << (indent > 0 ? ": " : ":");
      write_value(os, it.value(), indent, depth + 1);
    }
    os << nl << close_pad << '}';
  } else if (value.is_array()) {
    if (is_scalar_array(value)) {
      os << '[';
      bool first = true;
      for (const auto& v : value) {
        if (!first) os << (indent > 0 ? ", " : ",");
        first = false;
        write_scalar(os, v);
      }
      os << ']';
      return;
    }
    os << '[' << nl;
    bool first = true;
    for (const auto& v : value) {
      if (!first) os << ',' << nl;
      first = false;
      os << pad;
      write_value(os, v, indent, depth + 1);
    }
    os << nl << close_pad << ']';
  } else {
    write_scalar(os, value);
  }
}

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::invalid_params, "instance JSON: " + what);
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_json(std::ostream& os, const json& value, int indent) {
  write_value(os, value, indent, 0);
}

std::string dump_json(const json& value, int indent) {
  std::ostringstream os;
  write_json(os, value, indent);
  return os.str();
}

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  if (!rows.is_array()) schema_error("matrix must be an array of rows");
  const Index m = static_cast<Index>(rows.size());
  const Index n = m ? static_cast<Index>(rows[0].size()) : 0;
  Matrix M(m, n);
  for (Index i = 0; i < m; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n)
      schema_error("ragged matrix rows");
    for (Index j = 0; j < n; ++j) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) schema_error("matrix entry is not a number");
      M(i, j) = v.get<double>();
    }
  }
  return M;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& values) {
  if (!values.is_array()) schema_error("vector must be an array");
  Vector v(static_cast<Index>(values.size()));
  for (Index i = 0; i < v.size(); ++i) {
    const auto& x = values[static_cast<std::size_t>(i)];
    if (!x.is_number()) schema_error("vector entry is not a number");
    v[i] = x.get<double>();
  }
  return v;
}

json instance_to_json(const Instance& inst) {
  json doc;
  doc["name"] = inst.info().name;
  doc["p"] = vector_to_json(inst.p());
  doc["q"] = vector_to_json(inst.q());
  if (inst.cost().is_factored()) {
    doc["cost"] = {{"factored",
                    {{"E", matrix_to_json(inst.cost().E())},
                     {"F", matrix_to_json(inst.cost().F())}}}};
  } else {
    doc["cost"] = {{"dense", matrix_to_json(inst.cost().dense_entries())}};
  }
  if (inst.info().seed) doc["seed"] = *inst.info().seed;
  if (const auto& s = inst.p_measure().support()) doc["p_support"] = matrix_to_json(*s);
  if (const auto& s = inst.q_measure().support()) doc["q_support"] = matrix_to_json(*s);
  if (const auto& d = inst.decomposition()) {
    doc["decomposition"] = {{"W", matrix_to_json(d->W)},
                            {"H", matrix_to_json(d->H)},
                            {"S", matrix_to_json(d->S)}};
  }
  return doc;
}

Instance instance_from_json(const json& doc) {
  if (!doc.is_object()) schema_error("top level must be an object");
  static const std::vector<std::string> known = {
      "name", "p", "q", "cost", "seed", "p_support", "q_support",
      "decomposition"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      schema_error("unknown key '" + it.key() + "'");
  for (const char* key : {"p", "q", "cost"})
    if (!doc.contains(key)) schema_error(std::string("missing '") + key + "'");

  const Vector p = vector_from_json(doc["p"]);
  const Vector q = vector_from_json(doc["q"]);
  DiscreteMeasure mp = doc.contains("p_support")
                           ? DiscreteMeasure::validate(p, matrix_from_json(doc["p_support"]))
                           : DiscreteMeasure::validate(p);
  DiscreteMeasure mq = doc.contains("q_support")
                           ? DiscreteMeasure::validate(q, matrix_from_json(doc["q_support"]))
                           : DiscreteMeasure::validate(q);

  const json& cost = doc["cost"];
  std::optional<CostMatrix> C;
  if (cost.contains("dense")) {
    C = CostMatrix::dense(matrix_from_json(cost["dense"]));
  } else if (cost.contains("factored")) {
    const json& f = cost["factored"];
    if (!f.contains("E") || !f.contains("F")) schema_error("factored cost needs E and F");
    C = CostMatrix::factored(matrix_from_json(f["E"]), matrix_from_json(f["F"]));
  } else {
    schema_error("cost must be {\"dense\": ...} or {\"factored\": ...}");
  }

  InstanceInfo info;
  if (doc.contains("name")) info.name = doc["name"].get<std::string>();
  if (doc.contains("seed")) info.seed = doc["seed"].get<std::int64_t>();

  std::optional<PlantedDecomposition> dec;
  if (doc.contains("decomposition")) {
    const json& d = doc["decomposition"];
    if (!d.contains("W") || !d.contains("H") || !d.contains("S"))
      schema_error("decomposition needs W, H and S");
    dec = PlantedDecomposition{matrix_from_json(d["W"]), matrix_from_json(d["H"]),
                               matrix_from_json(d["S"])};
  }
  return Instance(std::move(mp), std::move(mq), std::move(*C), std::move(info),
                  std::move(dec));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::io_error, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  write_json(out, doc);
  out << '\n';
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

void save_instance(const std::filesystem::path& path, const Instance& inst) {
  write_json_file(path, instance_to_json(inst));
}

Instance load_instance(const std::filesystem::path& path) {
  return instance_from_json(read_json_file(path));
}

void write_csv_matrix(std::ostream& os, const Matrix& M) {
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) os << ',';
      os << format_real(M(i, j));
    }
    os << '\n';
  }
}

Matrix read_csv_matrix(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::io_error, "bad CSV cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::io_error, "ragged CSV rows");
    rows.push_back(std::move(row));
  }
  const Index m = static_cast<Index>(rows.size());
  const Index n = m ? static_cast<Index>(rows.front().size()) : 0;
  Matrix M(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return M;
}

void save_csv_matrix(const std::filesystem::path& path, const Matrix& M) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  write_csv_matrix(out, M);
}

Matrix load_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  return read_csv_matrix(in);
}

}  // namespace lsot::io

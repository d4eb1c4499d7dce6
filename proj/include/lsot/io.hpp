#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "lsot/problem.hpp"

namespace lsot::io {

using json = nlohmann::json;

/// Decimal rendering with 17 significant digits (round-trips bit-exactly).
std::string format_real(double value);

/// Serializes with every floating-point value in format_real notation.
/// Arrays holding only scalars are written on one line.
void write_json(std::ostream& os, const json& value, int indent = 2);
std::string dump_json(const json& value, int indent = 2);

json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const json& rows);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& values);

json instance_to_json(const Instance& inst);
Instance instance_from_json(const json& doc);

void save_instance(const std::filesystem::path& path, const Instance& inst);
Instance load_instance(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& doc);

/// Comma-separated rows, no header.
void write_csv_matrix(std::ostream& os, const Matrix& M);
Matrix read_csv_matrix(std::istream& is);
void save_csv_matrix(const std::filesystem::path& path, const Matrix& M);
Matrix load_csv_matrix(const std::filesystem::path& path);

}  // namespace lsot::io

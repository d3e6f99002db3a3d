#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace kamnf::cli {

// RFC 4180 table; every row starts with the artifact version and the config hash.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}
    void add_row(std::vector<std::string> cells);
    std::string render(const std::string& version, const std::string& config_hash) const;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

std::string csv_field(const std::string& text);
std::string num(double x);   // shortest round-trip form; "nan"/"inf" for non-finite values

// Files of one command, written only after the whole computation succeeded.
struct OutputSet {
    std::vector<std::pair<std::string, std::string>> files;
    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
    void write(const std::string& dir) const;
};

// JSON document with the version and config hash at the top level.
std::string render_json(nlohmann::json body, const std::string& version, const std::string& config_hash,
                        const nlohmann::json& config);

} // namespace kamnf::cli

#include "output.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "kamnf/hamiltonian.hpp"

namespace kamnf::cli {

void CsvTable::add_row(std::vector<std::string> cells)
{
    if (cells.size() != columns_.size()) throw std::logic_error("CsvTable: row width does not match the header");
    rows_.push_back(std::move(cells));
}

std::string CsvTable::render(const std::string& version, const std::string& config_hash) const
{
    std::string out = "artifact_version,config_hash";
    for (const auto& c : columns_) out += "," + csv_field(c);
    out += "\r\n";
    for (const auto& row : rows_) {
        out += csv_field(version) + "," + csv_field(config_hash);
        for (const auto& c : row) out += "," + csv_field(c);
        out += "\r\n";
    }
    return out;
}

std::string csv_field(const std::string& text)
{
    if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string num(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return format_double(x);
}

void OutputSet::write(const std::string& dir) const
{
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files) {
        std::filesystem::path path = std::filesystem::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << content;
    }
}

std::string render_json(nlohmann::json body, const std::string& version, const std::string& config_hash,
                        const nlohmann::json& config)
{
    body["artifact_version"] = version;
    body["config_hash"] = config_hash;
    body["config"] = config;
    return body.dump(2) + "\n";
}

} // namespace kamnf::cli

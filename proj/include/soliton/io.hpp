#ifndef SOLITON_IO_HPP
#define SOLITON_IO_HPP

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "soliton/end_builder.hpp"
#include "soliton/shrinker.hpp"
#include "soliton/spectrum.hpp"

namespace soliton::io {

using nlohmann::json;

json shrinker_to_json(const ShrinkerSurface& S);
ShrinkerSurface shrinker_from_json(const json& j);

json spectrum_to_json(const SpectrumData& spec);

// EndField bundle: metadata json + coefficient csv next to it
void save_end_field(const std::filesystem::path& dir, const std::string& stem,
                    const EndField& u);
EndField load_end_field(const std::filesystem::path& dir, const std::string& stem,
                        const ShrinkerSurface& S);

// csv: column names + columns (all same length), printed at full precision
void write_csv(const std::filesystem::path& file, const std::vector<std::string>& names,
               const std::vector<VectorXd>& cols);
std::vector<std::pair<std::string, VectorXd>> read_csv(const std::filesystem::path& file);

void write_text(const std::filesystem::path& file, const std::string& text);
json read_json(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const json& j);

// FNV-1a of the canonical config serialization; reproducibility stamp
std::string config_hash(const json& j);

}  // namespace soliton::io

#endif

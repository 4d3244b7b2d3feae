#ifndef MARPO_RUN_IO_HPP_
#define MARPO_RUN_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "marpo/trainer.hpp"

namespace marpo {

/// Config field names in file order. Each is also a CLI flag, with '_'
/// replaced by '-'.
const std::vector<std::string>& config_keys();

/// Sets one field from its textual value. Throws ValidationError for unknown
/// keys or unparsable values.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& config, std::string_view key);

/// `key = value` lines; '#' starts a comment. Missing keys keep defaults.
/// Reals are written with 17 significant digits so parsing is exact.
std::string serialize_config(const TrainConfig& config);
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

/// Short hex digest of the serialized config.
std::string run_id(const TrainConfig& config);

const std::vector<std::string>& metrics_columns();
/// 9 significant digits; non-finite values print as "nan".
std::string format_metric(double value);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

/// Creates `<root>/<timestamp>_seed<seed>`, adding a numeric suffix rather
/// than reusing an existing directory.
std::filesystem::path create_run_directory(const std::filesystem::path& root,
                                           std::uint64_t seed);

}  // namespace marpo

#endif  // MARPO_RUN_IO_HPP_

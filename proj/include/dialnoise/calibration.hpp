#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dialnoise/corpus.hpp"

namespace dialnoise {

struct LogitRecord {
  std::string example_id;
  std::vector<std::pair<std::string, double>> candidates;  // (label, logit)
  std::optional<std::string> gold;
};

struct CalibrationModel {
  double temperature = 1.0;
};

/// softmax(logits / temperature) with max subtraction.
Eigen::VectorXd tempered_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature);

/// Index of the first maximal entry.
Eigen::Index argmax(const Eigen::Ref<const Eigen::VectorXd>& v);

std::vector<std::pair<std::string, double>> apply_temperature(const LogitRecord& record,
                                                              double temperature);

const std::vector<double>& default_temperature_grid();

/// Mean negative log-likelihood of the gold labels at `temperature`.
double mean_nll(std::span<const LogitRecord> records, double temperature);

struct TemperatureFit {
  double temperature = 1.0;
  std::vector<std::pair<double, double>> nll_per_temperature;  // grid order
  double baseline_nll = 0.0;  // at temperature 1, always reported
};

/// Grid search; ties go to the smaller temperature.
TemperatureFit fit_temperature(std::span<const LogitRecord> dev, std::span<const double> grid);

/// Equal-width bins over max-probability confidence.
double expected_calibration_error(std::span<const LogitRecord> records, double temperature,
                                  std::size_t bins);

LogitRecord logit_record_from_json(const Json& j);
Json to_json(const LogitRecord& record);
std::vector<LogitRecord> load_logit_records(const std::filesystem::path& path);
Json to_json(const TemperatureFit& fit);
std::string render_fit(const TemperatureFit& fit);

}  // namespace dialnoise

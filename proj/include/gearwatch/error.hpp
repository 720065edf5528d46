/**
 * @file error.hpp
 * @brief Exception types for the monitoring pipeline, one per stage.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace gearwatch {

/// Pipeline stage that raised a fatal error. Values double as CLI exit codes.
enum class Stage : int {
  Config = 2,
  Ingest = 3,
  Modeling = 4,
  Monitoring = 5,
};

class Error : public std::runtime_error {
 public:
  Error(Stage stage, const std::string& what) : std::runtime_error(what), stage_(stage) {}

  [[nodiscard]] Stage stage() const noexcept { return stage_; }
  [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(stage_); }

 private:
  Stage stage_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(Stage::Config, what) {}
};

struct IngestError : Error {
  explicit IngestError(const std::string& what) : Error(Stage::Ingest, what) {}
};

struct ModelError : Error {
  explicit ModelError(const std::string& what) : Error(Stage::Modeling, what) {}
};

struct MonitorError : Error {
  explicit MonitorError(const std::string& what) : Error(Stage::Monitoring, what) {}
};

}  // namespace gearwatch

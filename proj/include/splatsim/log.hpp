#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

namespace splatsim::log {

enum class Level { Debug, Info, Warn, Error };

inline Level& threshold() {
  static Level level = Level::Info;
  return level;
}

inline const char* name(Level l) {
  switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
  }
  return "?";
}

/// One structured line on stderr: `level=info stage=simulate msg="..." key=value ...`.
inline void line(Level level, std::string_view stage, std::string_view msg, std::string_view fields = {}) {
  if (level < threshold()) return;
  std::string out = "level=" + std::string(name(level)) + " stage=" + std::string(stage) + " msg=\"" +
                    std::string(msg) + "\"";
  if (!fields.empty()) out += " " + std::string(fields);
  out += "\n";
  std::fputs(out.c_str(), stderr);
}

inline void info(std::string_view stage, std::string_view msg, std::string_view fields = {}) {
  line(Level::Info, stage, msg, fields);
}
inline void warn(std::string_view stage, std::string_view msg, std::string_view fields = {}) {
  line(Level::Warn, stage, msg, fields);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace splatsim::log

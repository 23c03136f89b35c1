#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace scenequal::log {

enum class Level { info, warning };

using Sink = std::function<void(Level, std::string_view)>;

// Routes a message to the installed sink (stderr by default).
void emit(Level level, std::string_view message);

inline void info(std::string_view message) { emit(Level::info, message); }
inline void warn(std::string_view message) { emit(Level::warning, message); }

// Replaces the sink and returns the previous one.
Sink set_sink(Sink sink);

// Suppresses info-level messages on the default sink.
void set_quiet(bool quiet);

// Installs a sink for the lifetime of the object and collects warnings.
class CaptureWarnings {
 public:
  CaptureWarnings();
  ~CaptureWarnings();
  CaptureWarnings(const CaptureWarnings&) = delete;
  CaptureWarnings& operator=(const CaptureWarnings&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view needle) const;

 private:
  Sink previous_;
  std::vector<std::string> messages_;
};

}  // namespace scenequal::log

#include "scenequal/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace scenequal::log {
namespace {

std::atomic<bool> g_quiet{false};

void default_sink(Level level, std::string_view message) {
  if (level == Level::info) {
    if (!g_quiet) std::cerr << "[info] " << message << '\n';
  } else {
    std::cerr << "[warn] " << message << '\n';
  }
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = default_sink;
  return sink;
}

}  // namespace

void emit(Level level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  current_sink()(level, message);
}

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = sink ? std::move(sink) : Sink(default_sink);
  return previous;
}

void set_quiet(bool quiet) { g_quiet = quiet; }

CaptureWarnings::CaptureWarnings() {
  previous_ = set_sink([this](Level level, std::string_view message) {
    if (level == Level::warning) messages_.emplace_back(message);
  });
}

CaptureWarnings::~CaptureWarnings() { set_sink(std::move(previous_)); }

bool CaptureWarnings::contains(std::string_view needle) const {
  for (const auto& m : messages_) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace scenequal::log

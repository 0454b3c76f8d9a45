#include "cardiotwin/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace cardiotwin::log {
namespace {

std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

void emit(Level at, const char* tag, std::string_view msg) {
  if (at < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[cardiotwin " << tag << "] " << msg << '\n';
}

}  // namespace

void set_level(Level l) { g_level.store(l); }
Level level() { return g_level.load(); }

void debug(std::string_view msg) { emit(Level::debug, "debug", msg); }
void info(std::string_view msg) { emit(Level::info, "info", msg); }
void warn(std::string_view msg) { emit(Level::warn, "warn", msg); }
void error(std::string_view msg) { emit(Level::error, "error", msg); }

}  // namespace cardiotwin::log

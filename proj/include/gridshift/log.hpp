#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace gridshift::log {

enum class Level : int { Error = 0, Info = 1, Debug = 2 };

// Verbosity is driven by GRIDSHIFT_LOG ("error" | "info" | "debug");
// everything goes to the error stream so data outputs stay clean.
inline Level threshold() {
  static const Level cached = [] {
    const char* env = std::getenv("GRIDSHIFT_LOG");
    if (env == nullptr) return Level::Error;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    if (std::strcmp(env, "info") == 0) return Level::Info;
    return Level::Error;
  }();
  return cached;
}

inline void vwrite(const char* tag, const char* fmt, std::va_list args) {
  std::fprintf(stderr, "[gridshift %s] ", tag);
  std::vfprintf(stderr, fmt, args);
  std::fputc('\n', stderr);
}

inline void error(const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  vwrite("error", fmt, args);
  va_end(args);
}

inline void info(const char* fmt, ...) {
  if (static_cast<int>(threshold()) < static_cast<int>(Level::Info)) return;
  std::va_list args;
  va_start(args, fmt);
  vwrite("info", fmt, args);
  va_end(args);
}

inline void debug(const char* fmt, ...) {
  if (static_cast<int>(threshold()) < static_cast<int>(Level::Debug)) return;
  std::va_list args;
  va_start(args, fmt);
  vwrite("debug", fmt, args);
  va_end(args);
}

}  // namespace gridshift::log

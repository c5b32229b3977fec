#include "fedm/common.hpp"

#include <atomic>
#include <exception>
#include <iostream>
#include <mutex>

namespace fedm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::protocol: return "protocol";
  }
  return "unknown";
}

void rethrow_with_stage(std::string_view stage) {
  const std::string prefix = "[" + std::string(stage) + "] ";
  try {
    throw;
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.fault(), prefix + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), prefix + e.what());
  } catch (const std::exception& e) {
    throw NumericalError(prefix + e.what());
  }
}

namespace {
std::atomic<bool> g_warnings{true};
std::mutex g_warn_mutex;
}  // namespace

void warn(const std::string& message) {
  if (!g_warnings.load(std::memory_order_relaxed)) return;
  std::lock_guard lock(g_warn_mutex);
  std::cerr << "fedm: warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings.store(enabled); }
bool warnings_enabled() { return g_warnings.load(); }

}  // namespace fedm

#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>
#include <string>

namespace ecslab::log {

inline std::atomic<bool>& quiet() {
    static std::atomic<bool> q{false};
    return q;
}

inline void info(const std::string& msg) {
    if (quiet()) return;
    static std::mutex m;
    std::lock_guard lk(m);
    std::cerr << msg << '\n';
}

inline void warn(const std::string& msg) {
    if (quiet()) return;
    static std::mutex m;
    std::lock_guard lk(m);
    std::cerr << "warning: " << msg << '\n';
}

/// Emit a warning only the first time `key` is seen in this process.
inline void warn_once(const std::string& key, const std::string& msg) {
    static std::mutex m;
    static std::set<std::string> seen;
    {
        std::lock_guard lk(m);
        if (!seen.insert(key).second) return;
    }
    warn(msg);
}

} // namespace ecslab::log

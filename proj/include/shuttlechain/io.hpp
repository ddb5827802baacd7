#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "shuttlechain/common.hpp"

namespace shuttlechain {

using ordered_json = nlohmann::ordered_json;

// Floating-point CSV cell: 17 significant digits round-trip exactly.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// RFC-style CSV quoting: only fields containing a comma, quote, or newline
// are quoted, with embedded quotes doubled.
inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex_u64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw error("failed writing '" + path.string() + "'");
}

// Collects the files of one run and finishes with a manifest.json holding
// their checksums. The manifest is written on success *and* on failure, so
// an output directory always documents what happened to it.
class RunRecorder {
  public:
    RunRecorder(std::filesystem::path dir, std::string command, std::string config_hash)
        : dir_(std::move(dir)),
          command_(std::move(command)),
          config_hash_(std::move(config_hash)),
          started_(utc_timestamp()) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    void add(const std::string& name, const std::string& content) {
        write_text_file(dir_ / name, content);
        files_.push_back({{"name", name},
                          {"bytes", content.size()},
                          {"fnv1a64", hex_u64(fnv1a64(content))}});
    }

    // status: "ok", "partial" (some sweep points failed) or "error"
    std::filesystem::path finish(const std::string& status, const std::string& error_message = "") {
        ordered_json m;
        m["schema_version"] = 1;
        m["tool"] = "shuttlechain";
        m["tool_version"] = version_string;
        m["command"] = command_;
        m["config_fnv1a64"] = config_hash_;
        m["started_utc"] = started_;
        m["finished_utc"] = utc_timestamp();
        m["status"] = status;
        if (!error_message.empty()) m["error"] = error_message;
        m["files"] = files_;
        const auto path = dir_ / "manifest.json";
        write_text_file(path, m.dump(2) + "\n");
        return path;
    }

  private:
    std::filesystem::path dir_;
    std::string command_;
    std::string config_hash_;
    std::string started_;
    ordered_json files_ = ordered_json::array();
};

}  // namespace shuttlechain

#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace landkit::stagelog {

// One structured stderr line per pipeline stage:
//   landkit: stage=composite year=2014 scenes=4 valid_pct=87.2510 elapsed_s=0.312
// Notes print in insertion order; the line is emitted on destruction so it
// also fires (with whatever was noted so far) when a stage throws.
class Stage {
public:
    explicit Stage(std::string name) : name_(std::move(name)) {
        start_ = std::chrono::steady_clock::now();
    }

    Stage(const Stage&) = delete;
    Stage& operator=(const Stage&) = delete;

    void note(const std::string& key, const std::string& value) {
        notes_.emplace_back(key, value);
    }
    void note(const std::string& key, const char* value) {
        notes_.emplace_back(key, value);
    }
    void note(const std::string& key, long long value) {
        notes_.emplace_back(key, std::to_string(value));
    }
    void note(const std::string& key, size_t value) {
        notes_.emplace_back(key, std::to_string(value));
    }
    void note(const std::string& key, int value) {
        notes_.emplace_back(key, std::to_string(value));
    }
    void note(const std::string& key, double value) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", value);
        notes_.emplace_back(key, buf);
    }

    ~Stage() {
        const auto elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start_)
                .count();
        std::string line = "landkit: stage=" + name_;
        for (const auto& [key, value] : notes_) line += " " + key + "=" + value;
        char buf[32];
        std::snprintf(buf, sizeof(buf), " elapsed_s=%.3f", elapsed);
        line += buf;
        std::fprintf(stderr, "%s\n", line.c_str());
    }

private:
    std::string name_;
    std::vector<std::pair<std::string, std::string>> notes_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace landkit::stagelog

#pragma once

#include <filesystem>
#include <fmt/format.h>
#include <json.hpp>
#include <set>
#include <unistd.h>
#include <string>
#include <vector>

#include "toolret/catalog.hpp"
#include "toolret/llm_gateway.hpp"
#include "toolret/util.hpp"

namespace test_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("toolret-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline toolret::Tool make_tool(std::string id, std::string description, std::string name = "") {
    toolret::Tool t;
    t.id = std::move(id);
    t.name = name.empty() ? "Tool " + t.id : std::move(name);
    t.category = "misc";
    t.description = std::move(description);
    return t;
}

inline toolret::QueryRecord make_query(std::string id, std::string text, std::set<std::string> gold,
                                       toolret::Split split = toolret::Split::train) {
    toolret::QueryRecord q;
    q.id = std::move(id);
    q.text = std::move(text);
    q.gold_tool_ids = std::move(gold);
    q.split = split;
    return q;
}

}  // namespace test_support

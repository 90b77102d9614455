#include "toolret/catalog.hpp"

#include <algorithm>
#include <json.hpp>

#include "toolret/util.hpp"

namespace toolret {

using nlohmann::json;

namespace {

std::string line_error(std::size_t line_no, const std::string& what) {
    return "line " + std::to_string(line_no) + ": " + what;
}

std::string required_string(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(line_error(line_no, std::string("missing field '") + key + "'"));
    if (!it->is_string())
        throw ValidationError(line_error(line_no, std::string("field '") + key + "' must be a string"));
    return it->get<std::string>();
}

template <typename Fn>
void for_each_record(const std::string& content, Fn&& fn) {
    auto lines = split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json obj;
        try {
            obj = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
            throw ValidationError(line_error(i + 1, std::string("malformed record: ") + e.what()));
        }
        if (!obj.is_object()) throw ValidationError(line_error(i + 1, "record is not an object"));
        fn(obj, i + 1);
    }
}

}  // namespace

ToolCatalog ToolCatalog::from_tools(std::vector<Tool> tools, std::uint64_t version) {
    ToolCatalog catalog;
    catalog.version_ = version;
    for (auto& tool : tools) {
        if (tool.id.empty()) throw ValidationError("tool with empty id");
        if (tool.description.empty()) throw ValidationError("tool '" + tool.id + "' has an empty description");
        if (tool.base_description.empty()) tool.base_description = tool.description;
        std::string id = tool.id;
        if (!catalog.tools_.emplace(id, std::move(tool)).second)
            throw ValidationError("duplicate tool id '" + id + "'");
    }
    return catalog;
}

const Tool* ToolCatalog::find(const std::string& id) const {
    auto it = tools_.find(id);
    return it == tools_.end() ? nullptr : &it->second;
}

const Tool& ToolCatalog::at(const std::string& id) const {
    const Tool* tool = find(id);
    if (!tool) throw NotFoundError("unknown tool id '" + id + "'");
    return *tool;
}

std::vector<std::string> ToolCatalog::ids() const {
    std::vector<std::string> out;
    out.reserve(tools_.size());
    for (const auto& [id, _] : tools_) out.push_back(id);
    return out;
}

std::string ToolCatalog::fingerprint() const {
    std::string buf;
    for (const auto& [id, tool] : tools_) {
        buf += id;
        buf += '\x1f';
        buf += tool.description;
        buf += '\x1e';
    }
    return hex64(fnv1a64(buf));
}

ToolCatalog ToolCatalog::with_description(const std::string& id, const std::string& text, int round,
                                          double dev_recall) const {
    if (text.empty()) throw ValidationError("new description for '" + id + "' is empty");
    auto it = tools_.find(id);
    if (it == tools_.end()) throw NotFoundError("unknown tool id '" + id + "'");
    ToolCatalog next = *this;
    Tool& tool = next.tools_.at(id);
    tool.description = text;
    tool.history.push_back({round, text, dev_recall});
    next.version_ = version_ + 1;
    return next;
}

ToolCatalog apply_description(const ToolCatalog& catalog, const std::string& tool_id,
                              const std::string& new_text, int round, double dev_recall) {
    return catalog.with_description(tool_id, new_text, round, dev_recall);
}

ToolCatalog parse_catalog(const std::string& content) {
    std::vector<Tool> tools;
    std::set<std::string> seen;
    for_each_record(content, [&](const json& obj, std::size_t line_no) {
        Tool tool;
        tool.id = required_string(obj, "id", line_no);
        tool.name = required_string(obj, "name", line_no);
        tool.category = required_string(obj, "category", line_no);
        tool.description = required_string(obj, "description", line_no);
        if (tool.id.empty()) throw ValidationError(line_error(line_no, "empty tool id"));
        if (tool.description.empty())
            throw ValidationError(line_error(line_no, "tool '" + tool.id + "' has an empty description"));
        if (!seen.insert(tool.id).second)
            throw ValidationError(line_error(line_no, "duplicate tool id '" + tool.id + "'"));
        if (obj.contains("base_description"))
            tool.base_description = required_string(obj, "base_description", line_no);
        if (auto it = obj.find("history"); it != obj.end()) {
            if (!it->is_array()) throw ValidationError(line_error(line_no, "history must be an array"));
            for (const auto& rev : *it) {
                try {
                    tool.history.push_back({rev.at("round").get<int>(), rev.at("text").get<std::string>(),
                                            rev.at("dev_recall").get<double>()});
                } catch (const json::exception& e) {
                    throw ValidationError(line_error(line_no, std::string("bad history entry: ") + e.what()));
                }
            }
        }
        tools.push_back(std::move(tool));
    });
    return ToolCatalog::from_tools(std::move(tools));
}

ToolCatalog load_catalog(const std::string& path) { return parse_catalog(read_file(path)); }

std::string serialize_catalog(const ToolCatalog& catalog) {
    std::string out;
    for (const auto& [id, tool] : catalog.tools()) {
        json obj = {{"id", tool.id},
                    {"name", tool.name},
                    {"category", tool.category},
                    {"description", tool.description}};
        if (tool.base_description != tool.description || !tool.history.empty())
            obj["base_description"] = tool.base_description;
        if (!tool.history.empty()) {
            json hist = json::array();
            for (const auto& rev : tool.history)
                hist.push_back({{"round", rev.round}, {"text", rev.text}, {"dev_recall", rev.dev_recall}});
            obj["history"] = std::move(hist);
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_catalog(const ToolCatalog& catalog, const std::string& path) {
    write_file(path, serialize_catalog(catalog));
}

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "unknown";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    throw ValidationError("unknown split '" + name + "' (expected train, dev or test)");
}

std::vector<QueryRecord> QueryDataset::split(Split which) const {
    std::vector<QueryRecord> out;
    for (const auto& r : records)
        if (r.split == which) out.push_back(r);
    return out;
}

const QueryRecord* QueryDataset::find(const std::string& id) const {
    for (const auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

void assign_splits(std::vector<QueryRecord>& records, std::uint64_t seed, const SplitRatios& ratios) {
    if (ratios.train_percent + ratios.dev_percent + ratios.test_percent != 100)
        throw ValidationError("split ratios must sum to 100");
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n = records.size();
    const std::size_t n_train = n * static_cast<std::size_t>(ratios.train_percent) / 100;
    const std::size_t n_dev = n * static_cast<std::size_t>(ratios.dev_percent) / 100;
    for (std::size_t rank = 0; rank < n; ++rank) {
        Split s = rank < n_train ? Split::train : rank < n_train + n_dev ? Split::dev : Split::test;
        records[order[rank]].split = s;
    }
}

QueryDataset parse_queries(const std::string& content, const ToolCatalog& catalog, std::uint64_t split_seed) {
    QueryDataset dataset;
    dataset.split_seed = split_seed;
    std::set<std::string> seen;
    for_each_record(content, [&](const json& obj, std::size_t line_no) {
        QueryRecord rec;
        rec.id = required_string(obj, "id", line_no);
        rec.text = required_string(obj, "query", line_no);
        if (rec.id.empty()) throw ValidationError(line_error(line_no, "empty query id"));
        if (!seen.insert(rec.id).second)
            throw ValidationError(line_error(line_no, "duplicate query id '" + rec.id + "'"));
        auto gold = obj.find("relevant_tool_ids");
        if (gold == obj.end() || !gold->is_array())
            throw ValidationError(line_error(line_no, "field 'relevant_tool_ids' must be an array"));
        for (const auto& g : *gold) {
            if (!g.is_string()) throw ValidationError(line_error(line_no, "relevant_tool_ids entries must be strings"));
            auto tool_id = g.get<std::string>();
            if (!catalog.contains(tool_id))
                throw ValidationError("query '" + rec.id + "' references unknown tool '" + tool_id + "'");
            rec.gold_tool_ids.insert(tool_id);
        }
        if (rec.gold_tool_ids.empty())
            throw ValidationError(line_error(line_no, "query '" + rec.id + "' has no relevant tools"));
        if (auto graded = obj.find("graded"); graded != obj.end() && !graded->is_null()) {
            if (!graded->is_object()) throw ValidationError(line_error(line_no, "field 'graded' must be an object"));
            for (const auto& [tool_id, grade] : graded->items()) {
                if (!grade.is_number_integer() || grade.get<int>() < 0 || grade.get<int>() > 2)
                    throw ValidationError("query '" + rec.id + "': grade for '" + tool_id + "' must be 0, 1 or 2");
                if (!catalog.contains(tool_id))
                    throw ValidationError("query '" + rec.id + "' grades unknown tool '" + tool_id + "'");
                rec.graded[tool_id] = grade.get<int>();
            }
        }
        dataset.records.push_back(std::move(rec));
    });
    assign_splits(dataset.records, split_seed, dataset.ratios);
    return dataset;
}

QueryDataset load_queries(const std::string& path, const ToolCatalog& catalog, std::uint64_t split_seed) {
    return parse_queries(read_file(path), catalog, split_seed);
}

std::string serialize_queries(const std::vector<QueryRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        json obj = {{"id", r.id}, {"query", r.text}, {"relevant_tool_ids", r.gold_tool_ids}};
        if (!r.graded.empty()) obj["graded"] = r.graded;
        out += obj.dump();
        out += '\n';
    }
    return out;
}

DescriptionCache cache_from_catalog(const ToolCatalog& catalog) {
    DescriptionCache cache;
    for (const auto& [id, tool] : catalog.tools()) {
        if (tool.history.empty()) continue;
        const auto& last = tool.history.back();
        cache[id] = {last.text, last.round, last.dev_recall};
    }
    return cache;
}

ToolCatalog apply_cache(const ToolCatalog& catalog, const DescriptionCache& cache) {
    ToolCatalog out = catalog;
    for (const auto& [id, entry] : cache) {
        if (!out.contains(id)) throw NotFoundError("description cache names unknown tool '" + id + "'");
        out = out.with_description(id, entry.description, entry.round, entry.dev_recall);
    }
    return out;
}

std::string serialize_cache(const DescriptionCache& cache) {
    json obj = json::object();
    for (const auto& [id, e] : cache)
        obj[id] = {{"description", e.description}, {"round", e.round}, {"dev_recall", e.dev_recall}};
    return obj.dump(2) + "\n";
}

DescriptionCache parse_cache(const std::string& content) {
    DescriptionCache cache;
    json obj;
    try {
        obj = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed description cache: ") + e.what());
    }
    if (!obj.is_object()) throw ValidationError("description cache must be a JSON object");
    for (const auto& [id, e] : obj.items()) {
        try {
            CacheEntry entry{e.at("description").get<std::string>(), e.at("round").get<int>(),
                             e.at("dev_recall").get<double>()};
            if (entry.description.empty()) throw ValidationError("empty cached description for '" + id + "'");
            cache[id] = std::move(entry);
        } catch (const json::exception& ex) {
            throw ValidationError("bad cache entry for '" + id + "': " + ex.what());
        }
    }
    return cache;
}

DescriptionCache load_cache(const std::string& path) { return parse_cache(read_file(path)); }

void save_cache(const DescriptionCache& cache, const std::string& path) {
    write_file(path, serialize_cache(cache));
}

}  // namespace toolret

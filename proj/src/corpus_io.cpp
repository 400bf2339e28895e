#include <fstream>
#include <sstream>

#include "ompadvisor/jsonl.hpp"

namespace ompadvisor {

namespace fs = std::filesystem;

ordered_json to_json(const Sample& s) {
    ordered_json nodes = ordered_json::array();
    for (std::size_t i = 0; i < s.dfg.names.size(); ++i) {
        nodes.push_back(ordered_json::array({s.dfg.names[i], s.dfg.alignment[i]}));
    }
    ordered_json edges = ordered_json::array();
    for (const auto& e : s.dfg.edges) {
        edges.push_back(ordered_json::array({e.to, e.from}));
    }
    ordered_json j;
    j["id"] = s.id;
    j["path"] = s.path;
    j["loop_code"] = s.loop_code;
    j["context_code"] = s.context_code;
    j["pragma_raw"] = s.pragma_raw ? ordered_json(*s.pragma_raw) : ordered_json(nullptr);
    j["label_pragma"] = s.label_pragma;
    j["label_private"] = s.label_private;
    j["label_reduction"] = s.label_reduction;
    j["dfg"] = ordered_json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
    j["split"] = to_string(s.split);
    return j;
}

Sample sample_from_json(const nlohmann::json& j) {
    try {
        Sample s;
        s.id = j.at("id").get<std::string>();
        s.path = j.at("path").get<std::string>();
        s.loop_code = j.at("loop_code").get<std::string>();
        s.context_code = j.at("context_code").get<std::string>();
        if (!j.at("pragma_raw").is_null()) {
            s.pragma_raw = j.at("pragma_raw").get<std::string>();
        }
        s.label_pragma = j.at("label_pragma").get<int>();
        s.label_private = j.at("label_private").get<int>();
        s.label_reduction = j.at("label_reduction").get<int>();
        for (const auto& node : j.at("dfg").at("nodes")) {
            s.dfg.names.push_back(node.at(0).get<std::string>());
            s.dfg.alignment.push_back(node.at(1).get<std::size_t>());
        }
        for (const auto& edge : j.at("dfg").at("edges")) {
            s.dfg.edges.push_back(DfgEdge{edge.at(0).get<int>(), edge.at(1).get<int>()});
        }
        s.split = split_from_string(j.at("split").get<std::string>());
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed sample record: ") + e.what());
    }
}

ordered_json to_json(const Reject& r) {
    ordered_json j;
    j["path"] = r.path;
    j["line"] = r.line;
    j["reason"] = to_string(r.reason);
    return j;
}

ordered_json to_json(const CorpusStats& stats) {
    ordered_json j;
    j["total"] = stats.total;
    ordered_json langs;
    for (const auto& [lang, counts] : stats.by_language) {
        langs[lang] = ordered_json{{"with_pragma", counts[0]}, {"without_pragma", counts[1]}};
    }
    j["languages"] = std::move(langs);
    j["clauses"] = ordered_json{{"private", stats.private_clauses}, {"reduction", stats.reduction_clauses}};
    j["lengths"] = ordered_json{
        {"<=15", stats.length_buckets[0]}, {"16-50", stats.length_buckets[1]}, {">50", stats.length_buckets[2]}};
    return j;
}

std::vector<Sample> read_jsonl(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw DataError("cannot open " + file.string());
    }
    std::vector<Sample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            samples.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw DataError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return samples;
}

void write_jsonl(const fs::path& file, const std::vector<Sample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        out += to_json(s).dump() + "\n";
    }
    write_text_file(file, out);
}

std::string read_text_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + file.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const fs::path& file, const std::string& content) {
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + file.string());
    }
    out << content;
    if (!out) {
        throw DataError("write failed: " + file.string());
    }
}

}  // namespace ompadvisor

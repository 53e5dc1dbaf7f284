#include "droid/jsonl.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "droid/digest.hpp"
#include "droid/errors.hpp"

namespace droid::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::string require_string(const json& obj, const char* field, size_t line_no) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw ValidationError("line " + std::to_string(line_no) + ": missing field " + field);
    if (!it->is_string())
        throw ValidationError("line " + std::to_string(line_no) + ": field " + field +
                              " must be a string");
    return it->get<std::string>();
}

CodeSample sample_from_json(const json& obj, size_t line_no) {
    CodeSample s;
    try {
        s.id = require_string(obj, "id", line_no);
        s.code = require_string(obj, "code", line_no);
        s.language = language_from_string(require_string(obj, "language", line_no));
        s.label = label_from_string(require_string(obj, "label", line_no));
        s.domain = domain_from_string(require_string(obj, "domain", line_no));
        s.split = split_from_string(require_string(obj, "split", line_no));
        if (obj.contains("generator") && !obj["generator"].is_null())
            s.generator = obj["generator"].get<std::string>();
        if (obj.contains("model_family") && !obj["model_family"].is_null())
            s.model_family = obj["model_family"].get<std::string>();
        if (obj.contains("suspicious")) s.suspicious = obj["suspicious"].get<bool>();
        if (obj.contains("decoding") && !obj["decoding"].is_null()) {
            const json& d = obj["decoding"];
            DecodingConfig cfg;
            cfg.strategy = strategy_from_string(require_string(d, "strategy", line_no));
            if (d.contains("temperature") && !d["temperature"].is_null())
                cfg.temperature = d["temperature"].get<double>();
            if (d.contains("top_k") && !d["top_k"].is_null())
                cfg.top_k = d["top_k"].get<int>();
            if (d.contains("top_p") && !d["top_p"].is_null())
                cfg.top_p = d["top_p"].get<double>();
            if (d.contains("beam_width") && !d["beam_width"].is_null())
                cfg.beam_width = d["beam_width"].get<int>();
            s.decoding = cfg;
        }
        s.validate();
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        if (msg.rfind("line ", 0) == 0) throw;
        throw ValidationError("line " + std::to_string(line_no) + ": " + msg);
    } catch (const json::exception& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    return s;
}

json sample_to_json(const CodeSample& s) {
    json obj;
    obj["id"] = s.id;
    obj["code"] = s.code;
    obj["language"] = to_string(s.language);
    obj["label"] = to_string(s.label);
    obj["domain"] = to_string(s.domain);
    obj["split"] = to_string(s.split);
    obj["suspicious"] = s.suspicious;
    if (s.generator) obj["generator"] = *s.generator;
    if (s.model_family) obj["model_family"] = *s.model_family;
    if (s.decoding) {
        json d;
        d["strategy"] = to_string(s.decoding->strategy);
        if (s.decoding->temperature) d["temperature"] = *s.decoding->temperature;
        if (s.decoding->top_k) d["top_k"] = *s.decoding->top_k;
        if (s.decoding->top_p) d["top_p"] = *s.decoding->top_p;
        if (s.decoding->beam_width) d["beam_width"] = *s.decoding->beam_width;
        obj["decoding"] = d;
    }
    return obj;
}

} // namespace

std::vector<CodeSample> parse_jsonl(const std::string& text, const std::string& source) {
    std::vector<CodeSample> samples;
    std::unordered_map<std::string, size_t> seen;  // id -> line number
    size_t line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        std::string line = text.substr(start, nl == std::string::npos ? nl : nl - start);
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        line_no++;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded())
            throw ValidationError(source + ": line " + std::to_string(line_no) +
                                  ": malformed JSON");
        if (!obj.is_object())
            throw ValidationError(source + ": line " + std::to_string(line_no) +
                                  ": expected a JSON object");
        CodeSample s = sample_from_json(obj, line_no);
        auto [it, inserted] = seen.emplace(s.id, line_no);
        if (!inserted)
            throw ValidationError(source + ": duplicate id '" + s.id + "' at lines " +
                                  std::to_string(it->second) + " and " +
                                  std::to_string(line_no));
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<CodeSample> load_jsonl(const std::string& path) {
    return parse_jsonl(read_file(path), path);
}

std::string to_jsonl(const std::vector<CodeSample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        out += sample_to_json(s).dump();
        out += '\n';
    }
    return out;
}

void save_jsonl(const std::vector<CodeSample>& samples, const std::string& path) {
    write_file(path, to_jsonl(samples));
}

DatasetManifest build_manifest(const std::string& name, const std::string& version,
                               const std::vector<CodeSample>& samples,
                               const std::string& dataset_path, uint64_t seed) {
    DatasetManifest m;
    m.name = name;
    m.version = version;
    m.seed = seed;
    for (const auto& s : samples) {
        std::string key = std::string(to_string(s.label)) + "|" + to_string(s.language) + "|" +
                          to_string(s.domain);
        m.counts[key]++;
    }
    ManifestEntry entry;
    entry.file = fs::path(dataset_path).filename().string();
    entry.sha256 = digest::sha256_file_hex(dataset_path);
    entry.records = samples.size();
    m.files.push_back(entry);
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    json obj;
    obj["name"] = m.name;
    obj["version"] = m.version;
    obj["seed"] = m.seed;
    obj["counts"] = m.counts;
    json files = json::array();
    for (const auto& f : m.files)
        files.push_back({{"file", f.file}, {"sha256", f.sha256}, {"records", f.records}});
    obj["files"] = files;
    write_file(path, obj.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::string& path) {
    json obj = json::parse(read_file(path), nullptr, false);
    if (obj.is_discarded()) throw ValidationError("manifest " + path + ": malformed JSON");
    DatasetManifest m;
    try {
        m.name = obj.at("name").get<std::string>();
        m.version = obj.at("version").get<std::string>();
        m.seed = obj.at("seed").get<uint64_t>();
        m.counts = obj.at("counts").get<std::map<std::string, uint64_t>>();
        for (const auto& f : obj.at("files")) {
            ManifestEntry e;
            e.file = f.at("file").get<std::string>();
            e.sha256 = f.at("sha256").get<std::string>();
            e.records = f.at("records").get<uint64_t>();
            m.files.push_back(e);
        }
    } catch (const json::exception& e) {
        throw ValidationError("manifest " + path + ": " + e.what());
    }
    return m;
}

void verify_manifest(const std::string& manifest_path) {
    DatasetManifest m = load_manifest(manifest_path);
    fs::path dir = fs::path(manifest_path).parent_path();
    uint64_t total_counted = 0;
    for (const auto& [key, count] : m.counts) total_counted += count;
    uint64_t total_records = 0;
    for (const auto& f : m.files) {
        std::string full = (dir / f.file).string();
        std::string digest = digest::sha256_file_hex(full);
        if (digest != f.sha256)
            throw ValidationError("manifest: digest mismatch for " + f.file);
        auto samples = load_jsonl(full);
        if (samples.size() != f.records)
            throw ValidationError("manifest: record count mismatch for " + f.file + ": " +
                                  std::to_string(samples.size()) + " vs " +
                                  std::to_string(f.records));
        total_records += samples.size();
    }
    if (total_counted != total_records)
        throw ValidationError("manifest: cell counts sum to " + std::to_string(total_counted) +
                              " but files hold " + std::to_string(total_records) + " records");
}

} // namespace droid::corpus

#include "osb/io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "osb/errors.hpp"

namespace osb {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'O', 'S', 'B', 'T', 'N', 'S', 'R', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& buf, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw FileError("cannot read " + path);
    return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FileError("cannot write " + path);
}

json parse_json(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
}

}  // namespace

void write_tensors(const std::string& path,
                   const std::map<std::string, Tensor>& tensors) {
    json manifest;
    manifest["schema_version"] = 1;
    json entries = json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        if (t.rank() < 1 || t.rank() > 4)
            throw std::invalid_argument("write_tensors: " + name + " has unsupported rank");
        json e;
        e["shape"] = t.shape;
        e["dtype"] = "f32";
        e["offset"] = offset;
        entries[name] = std::move(e);
        offset += 4 * static_cast<std::uint64_t>(t.numel());
    }
    manifest["tensors"] = std::move(entries);
    const std::string mtext = manifest.dump();

    std::string out;
    out.reserve(16 + mtext.size() + offset);
    out.append(kMagic, sizeof kMagic);
    put_u64(out, mtext.size());
    out += mtext;
    for (const auto& [name, t] : tensors)
        for (float f : t.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(out, bits);
        }
    write_file(path, out);
}

std::map<std::string, Tensor> read_tensors(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
        throw ParseError(path + ": not a tensor container");
    const std::uint64_t mlen = get_u64(buf, 8);
    if (16 + mlen > buf.size())
        throw ParseError(path + ": manifest length exceeds file size");
    const json manifest = parse_json(buf.substr(16, mlen), path);
    if (!manifest.is_object() || !manifest.contains("schema_version") ||
        !manifest["schema_version"].is_number_integer())
        throw ParseError(path + ": missing schema_version");
    if (manifest["schema_version"].get<int>() != 1)
        throw SchemaError(path + ": unsupported schema_version " +
                          manifest["schema_version"].dump());
    if (!manifest.contains("tensors") || !manifest["tensors"].is_object())
        throw ParseError(path + ": missing tensors table");

    const std::size_t blob_pos = 16 + mlen;
    const std::uint64_t blob_size = buf.size() - blob_pos;

    std::map<std::string, Tensor> out;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;  // offset, bytes
    for (const auto& [name, e] : manifest["tensors"].items()) {
        if (!e.is_object() || !e.contains("shape") || !e.contains("dtype") ||
            !e.contains("offset"))
            throw ParseError(path + ": tensor " + name + " entry malformed");
        if (e["dtype"] != "f32")
            throw ParseError(path + ": tensor " + name + " has unsupported dtype");
        std::vector<int> shape;
        std::uint64_t numel = 1;
        for (const auto& d : e["shape"]) {
            if (!d.is_number_integer() || d.get<std::int64_t>() <= 0)
                throw ParseError(path + ": tensor " + name + " has a bad dimension");
            shape.push_back(d.get<int>());
            numel *= static_cast<std::uint64_t>(shape.back());
        }
        if (shape.empty() || shape.size() > 4)
            throw ParseError(path + ": tensor " + name + " has unsupported rank");
        if (!e["offset"].is_number_integer() || e["offset"].get<std::int64_t>() < 0)
            throw ParseError(path + ": tensor " + name + " has a bad offset");
        const std::uint64_t off = e["offset"].get<std::uint64_t>();
        const std::uint64_t bytes = 4 * numel;
        if (off + bytes > blob_size)
            throw ParseError(path + ": tensor " + name + " overruns the blob");
        spans.emplace_back(off, bytes);

        Tensor t(shape);
        const char* src = buf.data() + blob_pos + off;
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b)
                bits |= static_cast<std::uint32_t>(
                            static_cast<unsigned char>(src[4 * i + b]))
                        << (8 * b);
            std::memcpy(&t.data[i], &bits, 4);
        }
        out.emplace(name, std::move(t));
    }

    std::sort(spans.begin(), spans.end());
    std::uint64_t covered = 0;
    for (const auto& [off, bytes] : spans) {
        if (off != covered)
            throw ParseError(path + ": tensor blob has gaps or overlaps");
        covered = off + bytes;
    }
    if (covered != blob_size)
        throw ParseError(path + ": tensor blob size does not match the manifest");
    return out;
}

WeightBundle read_weights(const std::string& path) {
    WeightBundle w;
    w.tensors = read_tensors(path);
    return w;
}

void write_weights(const std::string& path, const WeightBundle& weights) {
    write_tensors(path, weights.tensors);
}

namespace {

std::string image_path(const std::string& dir, int image_id) {
    return dir + "/image_" + std::to_string(image_id) + ".osbt";
}

std::string ref_path(const std::string& dir, int annotation_id) {
    return dir + "/ref_" + std::to_string(annotation_id) + ".osbt";
}

BackboneFeatures load_backbone(const std::string& path) {
    const std::map<std::string, Tensor> tensors = read_tensors(path);
    BackboneFeatures f;
    const char* names[4] = {"c2", "c3", "c4", "c5"};
    Tensor* slots[4] = {&f.c2, &f.c3, &f.c4, &f.c5};
    for (int i = 0; i < 4; ++i) {
        const auto it = tensors.find(names[i]);
        if (it == tensors.end())
            throw ParseError(path + ": missing tensor " + names[i]);
        if (it->second.rank() != 3 ||
            it->second.dim(2) != kBackboneChannels[static_cast<std::size_t>(i)])
            throw ParseError(path + ": tensor " + names[i] + " must have " +
                             std::to_string(kBackboneChannels[static_cast<std::size_t>(i)]) +
                             " channels, got " + shape_string(it->second));
        *slots[i] = it->second;
    }
    return f;
}

void save_backbone(const std::string& path, const BackboneFeatures& f) {
    const Tensor* slots[4] = {&f.c2, &f.c3, &f.c4, &f.c5};
    std::map<std::string, Tensor> tensors;
    const char* names[4] = {"c2", "c3", "c4", "c5"};
    for (int i = 0; i < 4; ++i) {
        if (slots[i]->rank() != 3 ||
            slots[i]->dim(2) != kBackboneChannels[static_cast<std::size_t>(i)])
            throw std::invalid_argument(std::string("activation ") + names[i] +
                                        " must have " +
                                        std::to_string(kBackboneChannels[static_cast<std::size_t>(i)]) +
                                        " channels");
        tensors.emplace(names[i], *slots[i]);
    }
    write_tensors(path, tensors);
}

}  // namespace

BackboneFeatures ActivationStore::load_image(int image_id) const {
    return load_backbone(image_path(dir, image_id));
}

BackboneFeatures ActivationStore::load_reference(int annotation_id) const {
    return load_backbone(ref_path(dir, annotation_id));
}

void ActivationStore::save_image(int image_id, const BackboneFeatures& f) const {
    save_backbone(image_path(dir, image_id), f);
}

void ActivationStore::save_reference(int annotation_id, const BackboneFeatures& f) const {
    save_backbone(ref_path(dir, annotation_id), f);
}

bool ActivationStore::has_image(int image_id) const {
    return std::filesystem::exists(image_path(dir, image_id));
}

bool ActivationStore::has_reference(int annotation_id) const {
    return std::filesystem::exists(ref_path(dir, annotation_id));
}

namespace {

// Shared JSONL plumbing: header line, then one record per line.
void write_jsonl(const std::string& path, const char* kind,
                 const std::vector<json>& records) {
    std::string out;
    json header;
    header["schema_version"] = 1;
    header["kind"] = kind;
    out += header.dump();
    out += '\n';
    for (const json& r : records) {
        out += r.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<json> read_jsonl(const std::string& path, const char* kind) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    const json header = parse_json(line, path + " header");
    if (!header.is_object() || !header.contains("schema_version") ||
        !header["schema_version"].is_number_integer() || !header.contains("kind"))
        throw ParseError(path + ": malformed header line");
    if (header["schema_version"].get<int>() != 1)
        throw SchemaError(path + ": unsupported schema_version " +
                          header["schema_version"].dump());
    if (header["kind"] != kind)
        throw SchemaError(path + ": expected a " + std::string(kind) + " file, got " +
                          header["kind"].dump());

    std::vector<json> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        records.push_back(parse_json(line, path + ":" + std::to_string(line_no)));
    }
    return records;
}

int require_int(const json& r, const char* field, const std::string& where) {
    if (!r.contains(field) || !r[field].is_number_integer())
        throw ParseError(where + ": missing integer field " + field);
    return r[field].get<int>();
}

}  // namespace

void write_episodes(const std::string& path, const std::vector<Episode>& episodes) {
    std::vector<json> records;
    records.reserve(episodes.size());
    for (const Episode& e : episodes) {
        json r;
        r["episode_id"] = e.episode_id;
        r["run"] = e.run;
        r["image_id"] = e.image_id;
        r["category_id"] = e.category_id;
        r["reference_ann_ids"] = e.reference_ann_ids;
        records.push_back(std::move(r));
    }
    write_jsonl(path, "episodes", records);
}

std::vector<Episode> read_episodes(const std::string& path) {
    std::vector<Episode> out;
    for (const json& r : read_jsonl(path, "episodes")) {
        Episode e;
        if (!r.contains("episode_id") || !r["episode_id"].is_string())
            throw ParseError(path + ": episode record lacks episode_id");
        e.episode_id = r["episode_id"].get<std::string>();
        e.run = require_int(r, "run", path);
        e.image_id = require_int(r, "image_id", path);
        e.category_id = require_int(r, "category_id", path);
        if (!r.contains("reference_ann_ids") || !r["reference_ann_ids"].is_array())
            throw ParseError(path + ": episode record lacks reference_ann_ids");
        for (const auto& v : r["reference_ann_ids"]) {
            if (!v.is_number_integer())
                throw ParseError(path + ": reference_ann_ids must be integers");
            e.reference_ann_ids.push_back(v.get<int>());
        }
        out.push_back(std::move(e));
    }
    return out;
}

void write_predictions(const std::string& path,
                       const std::vector<PredictionRecord>& records) {
    std::vector<json> lines;
    lines.reserve(records.size());
    for (const PredictionRecord& rec : records) {
        json r;
        r["episode_id"] = rec.episode_id;
        json dets = json::array();
        for (const PredDetection& d : rec.detections) {
            json jd;
            jd["bbox"] = d.bbox;
            jd["score"] = d.score;
            if (d.mask.has_value()) {
                json m;
                m["size"] = {d.mask->height, d.mask->width};
                m["counts"] = d.mask->counts;
                jd["mask"] = std::move(m);
            }
            dets.push_back(std::move(jd));
        }
        r["detections"] = std::move(dets);
        lines.push_back(std::move(r));
    }
    write_jsonl(path, "predictions", lines);
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
    std::vector<PredictionRecord> out;
    for (const json& r : read_jsonl(path, "predictions")) {
        PredictionRecord rec;
        if (!r.contains("episode_id") || !r["episode_id"].is_string())
            throw ParseError(path + ": prediction record lacks episode_id");
        rec.episode_id = r["episode_id"].get<std::string>();
        if (!r.contains("detections") || !r["detections"].is_array())
            throw ParseError(path + ": prediction record lacks detections");
        for (const auto& jd : r["detections"]) {
            PredDetection d;
            if (!jd.contains("bbox") || !jd["bbox"].is_array() || jd["bbox"].size() != 4)
                throw ParseError(path + ": detection bbox must have 4 numbers");
            for (std::size_t i = 0; i < 4; ++i) {
                if (!jd["bbox"][i].is_number())
                    throw ParseError(path + ": detection bbox must have 4 numbers");
                d.bbox[i] = jd["bbox"][i].get<double>();
            }
            if (!jd.contains("score") || !jd["score"].is_number())
                throw ParseError(path + ": detection lacks a score");
            d.score = jd["score"].get<double>();
            if (jd.contains("mask")) {
                const auto& m = jd["mask"];
                if (!m.is_object() || !m.contains("size") || !m["size"].is_array() ||
                    m["size"].size() != 2 || !m.contains("counts") ||
                    !m["counts"].is_array())
                    throw ParseError(path + ": detection mask malformed");
                RleMask rle;
                rle.height = m["size"][0].get<int>();
                rle.width = m["size"][1].get<int>();
                for (const auto& c : m["counts"]) {
                    if (!c.is_number_integer() || c.get<std::int64_t>() < 0)
                        throw ParseError(path + ": mask counts must be non-negative");
                    rle.counts.push_back(c.get<std::uint32_t>());
                }
                d.mask = std::move(rle);
            }
            rec.detections.push_back(std::move(d));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace osb

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "osb/errors.hpp"
#include "osb/io.hpp"
#include "testutil.hpp"

using namespace osb;
using testutil::TempDir;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    REQUIRE(bool(out));
}

// Container with arbitrary manifest/blob, for malformed-input tests.
std::string container(const std::string& manifest, const std::string& blob) {
    std::string out = "OSBTNSR1";
    const std::uint64_t n = manifest.size();
    for (int i = 0; i < 8; ++i) out.push_back(char((n >> (8 * i)) & 0xff));
    out += manifest;
    out += blob;
    return out;
}

BackboneFeatures toy_backbone(std::mt19937_64& g) {
    BackboneFeatures f;
    f.c2 = testutil::random_tensor({8, 8, 256}, g);
    f.c3 = testutil::random_tensor({4, 4, 512}, g);
    f.c4 = testutil::random_tensor({2, 2, 1024}, g);
    f.c5 = testutil::random_tensor({1, 1, 2048}, g);
    return f;
}

bool same_tensor(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
}

}  // namespace

TEST_CASE("tensor containers round-trip exactly and rewrite byte-identically") {
    TempDir tmp("tensors");
    auto g = testutil::rng(41);
    std::map<std::string, Tensor> tensors;
    tensors["alpha"] = testutil::random_tensor({7}, g);
    tensors["beta"] = testutil::random_tensor({3, 5}, g);
    tensors["gamma.weight"] = testutil::random_tensor({2, 3, 4}, g);
    tensors["delta"] = testutil::random_tensor({2, 2, 3, 4}, g);
    tensors["tiny"] = Tensor({1});  // zero value survives

    const std::string path = tmp.file("w.osbt");
    write_tensors(path, tensors);
    const std::map<std::string, Tensor> back = read_tensors(path);
    REQUIRE(back.size() == tensors.size());
    for (const auto& [name, t] : tensors) {
        REQUIRE(back.count(name) == 1);
        CHECK(same_tensor(back.at(name), t));
    }

    const std::string again = tmp.file("w2.osbt");
    write_tensors(again, back);
    CHECK(slurp(path) == slurp(again));

    WeightBundle w;
    w.tensors = tensors;
    write_weights(tmp.file("weights.osbt"), w);
    CHECK(same_tensor(read_weights(tmp.file("weights.osbt")).tensor("beta", 2),
                      tensors["beta"]));

    CHECK_THROWS_AS(read_tensors(tmp.file("missing.osbt")), FileError);
}

TEST_CASE("tensor container rejects malformed bytes") {
    TempDir tmp("badtensors");
    const std::string p = tmp.file("bad.osbt");

    spit(p, "short");
    CHECK_THROWS_AS(read_tensors(p), ParseError);

    spit(p, "NOTMAGIC" + std::string(8, '\0'));
    CHECK_THROWS_AS(read_tensors(p), ParseError);

    // Manifest length runs past the end of the file.
    {
        std::string b = "OSBTNSR1";
        b += std::string(1, char(200)) + std::string(7, '\0');
        spit(p, b);
        CHECK_THROWS_AS(read_tensors(p), ParseError);
    }

    spit(p, container("{not json", ""));
    CHECK_THROWS_AS(read_tensors(p), ParseError);

    spit(p, container(R"({"tensors":{}})", ""));
    CHECK_THROWS_AS(read_tensors(p), ParseError);  // no schema_version

    spit(p, container(R"({"schema_version":2,"tensors":{}})", ""));
    CHECK_THROWS_AS(read_tensors(p), SchemaError);

    spit(p, container(R"({"schema_version":1})", ""));
    CHECK_THROWS_AS(read_tensors(p), ParseError);  // no tensors table

    const std::string four(4, '\x01');
    spit(p, container(
             R"({"schema_version":1,"tensors":{"a":{"shape":[1],"dtype":"f64","offset":0}}})",
             four));
    CHECK_THROWS_AS(read_tensors(p), ParseError);  // dtype

    spit(p, container(
             R"({"schema_version":1,"tensors":{"a":{"shape":[0],"dtype":"f32","offset":0}}})",
             ""));
    CHECK_THROWS_AS(read_tensors(p), ParseError);  // zero dim

    spit(p, container(
             R"({"schema_version":1,"tensors":{"a":{"shape":[2],"dtype":"f32","offset":0}}})",
             four));
    CHECK_THROWS_AS(read_tensors(p), ParseError);  // overruns blob

    // Gap: tensor starts at 4 but bytes 0..3 belong to nobody.
    spit(p, container(
             R"({"schema_version":1,"tensors":{"a":{"shape":[1],"dtype":"f32","offset":4}}})",
             four + four));
    CHECK_THROWS_AS(read_tensors(p), ParseError);

    // Overlap: both tensors claim offset 0.
    spit(p, container(
             R"({"schema_version":1,"tensors":{"a":{"shape":[1],"dtype":"f32","offset":0},)"
             R"("b":{"shape":[1],"dtype":"f32","offset":0}}})",
             four));
    CHECK_THROWS_AS(read_tensors(p), ParseError);

    // Trailing unclaimed bytes.
    spit(p, container(
             R"({"schema_version":1,"tensors":{"a":{"shape":[1],"dtype":"f32","offset":0}}})",
             four + four));
    CHECK_THROWS_AS(read_tensors(p), ParseError);

    spit(p, container(
             R"({"schema_version":1,"tensors":{"a":{"shape":[1],"dtype":"f32"}}})",
             four));
    CHECK_THROWS_AS(read_tensors(p), ParseError);  // no offset
}

TEST_CASE("activation stores save and load backbone stages by id") {
    TempDir tmp("acts");
    const ActivationStore store{tmp.path};
    auto g = testutil::rng(42);
    const BackboneFeatures img = toy_backbone(g);
    const BackboneFeatures ref = toy_backbone(g);

    CHECK(!store.has_image(7));
    store.save_image(7, img);
    store.save_reference(7, ref);  // same id, distinct file
    CHECK(store.has_image(7));
    CHECK(store.has_reference(7));
    CHECK(!store.has_reference(8));

    const BackboneFeatures img_back = store.load_image(7);
    const BackboneFeatures ref_back = store.load_reference(7);
    CHECK(same_tensor(img_back.c2, img.c2));
    CHECK(same_tensor(img_back.c5, img.c5));
    CHECK(same_tensor(ref_back.c3, ref.c3));
    CHECK(!same_tensor(ref_back.c2, img.c2));

    BackboneFeatures bad = img;
    bad.c3 = Tensor({4, 4, 100});
    CHECK_THROWS_AS(store.save_image(9, bad), std::invalid_argument);

    // A container missing one stage fails on load.
    std::map<std::string, Tensor> partial;
    partial["c2"] = img.c2;
    partial["c3"] = img.c3;
    partial["c4"] = img.c4;
    write_tensors(tmp.file("image_11.osbt"), partial);
    CHECK_THROWS_AS(store.load_image(11), ParseError);
    CHECK_THROWS_AS(store.load_image(12345), FileError);
}

TEST_CASE("episode files round-trip through the schema header") {
    TempDir tmp("eps");
    std::vector<Episode> eps(3);
    eps[0] = {episode_key(1, 10, 2), 1, 10, 2, {4, 9, 4}};
    eps[1] = {episode_key(1, 11, 2), 1, 11, 2, {}};
    eps[2] = {episode_key(2, 10, 5), 2, 10, 5, {77}};

    const std::string p = tmp.file("episodes.jsonl");
    write_episodes(p, eps);

    // First line is the header, one record per following line.
    {
        std::istringstream in(slurp(p));
        std::string line;
        REQUIRE(std::getline(in, line));
        const auto header = nlohmann::json::parse(line);
        CHECK(header["schema_version"] == 1);
        CHECK(header["kind"] == "episodes");
        int records = 0;
        while (std::getline(in, line)) ++records;
        CHECK(records == 3);
    }

    const std::vector<Episode> back = read_episodes(p);
    REQUIRE(back.size() == eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        CHECK(back[i].episode_id == eps[i].episode_id);
        CHECK(back[i].run == eps[i].run);
        CHECK(back[i].image_id == eps[i].image_id);
        CHECK(back[i].category_id == eps[i].category_id);
        CHECK(back[i].reference_ann_ids == eps[i].reference_ann_ids);
    }

    write_episodes(tmp.file("again.jsonl"), back);
    CHECK(slurp(p) == slurp(tmp.file("again.jsonl")));
}

TEST_CASE("jsonl readers reject wrong headers and broken records") {
    TempDir tmp("jsonl");
    const std::string p = tmp.file("f.jsonl");

    spit(p, "");
    CHECK_THROWS_AS(read_episodes(p), ParseError);

    spit(p, "not json\n");
    CHECK_THROWS_AS(read_episodes(p), ParseError);

    spit(p, "{\"schema_version\":1}\n");
    CHECK_THROWS_AS(read_episodes(p), ParseError);  // kind missing

    spit(p, "{\"schema_version\":3,\"kind\":\"episodes\"}\n");
    CHECK_THROWS_AS(read_episodes(p), SchemaError);

    // Kind cross-check in both directions.
    write_episodes(p, {});
    CHECK_THROWS_AS(read_predictions(p), SchemaError);
    write_predictions(p, {});
    CHECK_THROWS_AS(read_episodes(p), SchemaError);

    const std::string header = "{\"schema_version\":1,\"kind\":\"episodes\"}\n";
    spit(p, header + "{broken\n");
    CHECK_THROWS_AS(read_episodes(p), ParseError);
    try {
        spit(p, header + "{}\n{broken\n");
        read_episodes(p);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        // The first bad line is line 2 (the {} record fails field checks first).
        CHECK(std::string(e.what()).find(p) != std::string::npos);
    }

    spit(p, header + R"({"episode_id":"x","run":1,"image_id":2})" + "\n");
    CHECK_THROWS_AS(read_episodes(p), ParseError);  // category_id missing

    spit(p, header +
                R"({"episode_id":"x","run":1,"image_id":2,"category_id":3,"reference_ann_ids":[1.5]})" +
                "\n");
    CHECK_THROWS_AS(read_episodes(p), ParseError);

    // Blank lines are tolerated between records.
    spit(p, header + "\n" +
                R"({"episode_id":"x","run":1,"image_id":2,"category_id":3,"reference_ann_ids":[]})" +
                "\n\n");
    CHECK(read_episodes(p).size() == 1);

    CHECK_THROWS_AS(read_episodes(tmp.file("nope.jsonl")), FileError);
}

TEST_CASE("prediction files carry boxes, scores, and optional masks") {
    TempDir tmp("preds");
    std::vector<PredictionRecord> recs(2);
    recs[0].episode_id = "r1-i1-c1";
    PredDetection boxed;
    boxed.bbox = {1.5, 2.25, 10, 20};
    boxed.score = 0.625;
    PredDetection masked = boxed;
    masked.score = 0.5;
    masked.mask = RleMask{4, 3, {2, 3, 7}};
    recs[0].detections = {boxed, masked};
    recs[1].episode_id = "r1-i2-c1";

    const std::string p = tmp.file("preds.jsonl");
    write_predictions(p, recs);
    const std::vector<PredictionRecord> back = read_predictions(p);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == recs[0]);
    CHECK(back[1] == recs[1]);
    CHECK(!back[0].detections[0].mask.has_value());
    CHECK(back[0].detections[1].mask.has_value());

    write_predictions(tmp.file("again.jsonl"), back);
    CHECK(slurp(p) == slurp(tmp.file("again.jsonl")));

    const std::string header = "{\"schema_version\":1,\"kind\":\"predictions\"}\n";
    spit(p, header + R"({"episode_id":"x","detections":[{"bbox":[1,2,3],"score":0.5}]})" + "\n");
    CHECK_THROWS_AS(read_predictions(p), ParseError);
    spit(p, header + R"({"episode_id":"x","detections":[{"bbox":[1,2,3,4]}]})" + "\n");
    CHECK_THROWS_AS(read_predictions(p), ParseError);
    spit(p, header +
                R"({"episode_id":"x","detections":[{"bbox":[1,2,3,4],"score":0.5,"mask":{"size":[2,2],"counts":[-1,5]}}]})" +
                "\n");
    CHECK_THROWS_AS(read_predictions(p), ParseError);
    spit(p, header +
                R"({"episode_id":"x","detections":[{"bbox":[1,2,3,4],"score":0.5,"mask":{"counts":[4]}}]})" +
                "\n");
    CHECK_THROWS_AS(read_predictions(p), ParseError);
    spit(p, header + R"({"episode_id":"x"})" + "\n");
    CHECK_THROWS_AS(read_predictions(p), ParseError);  // detections missing
}

#pragma once

#include <map>
#include <string>
#include <vector>

#include "osb/episodes.hpp"
#include "osb/evaluation.hpp"
#include "osb/matching.hpp"

namespace osb {

// Tensor container: 8-byte magic "OSBTNSR1", a little-endian u64 manifest
// length, a JSON manifest mapping tensor names to shape/dtype/offset, then a
// contiguous little-endian float32 blob. Offsets are relative to the blob
// start; the writer lays tensors out in name order without gaps, the reader
// accepts any non-overlapping layout that covers the blob exactly.
void write_tensors(const std::string& path,
                   const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_tensors(const std::string& path);

WeightBundle read_weights(const std::string& path);
void write_weights(const std::string& path, const WeightBundle& weights);

// Backbone activations live one container per frame under a directory:
// image_<image_id>.osbt for queries, ref_<annotation_id>.osbt for reference
// crops, each holding tensors "c2".."c5" with 256/512/1024/2048 channels.
struct ActivationStore {
    std::string dir;

    BackboneFeatures load_image(int image_id) const;
    BackboneFeatures load_reference(int annotation_id) const;
    void save_image(int image_id, const BackboneFeatures& f) const;
    void save_reference(int annotation_id, const BackboneFeatures& f) const;
    bool has_image(int image_id) const;
    bool has_reference(int annotation_id) const;
};

// JSONL files start with a header line {"schema_version":1,"kind":...};
// every following line is one record. Writers emit records in input order,
// readers preserve it.
void write_episodes(const std::string& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_episodes(const std::string& path);

void write_predictions(const std::string& path,
                       const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::string& path);

}  // namespace osb

#pragma once

#include <string>

#include "falcon/flow_image.hpp"
#include "falcon/lstm.hpp"
#include "falcon/pcap.hpp"

namespace falcon::net {

struct PipelineOptions {
  bool bidirectional = true;
  img::SerializeMode mode = img::SerializeMode::headers;
};

// Flow images for one capture, in first-packet-time order.
std::vector<img::FlowImage> capture_to_images(const pcap::CaptureSet& capture,
                                              img::SerializeMode mode);

// Flow vectors for one capture through a trained CNN.
CaptureSequence capture_to_sequence(const pcap::CaptureSet& capture, const CnnModel& cnn,
                                    img::SerializeMode mode);

// parse -> split -> serialize -> normalize -> image -> img2vec -> bi-LSTM.
// Throws errc::no_flows when the capture yields no usable flows.
NetworkFeature network_feature_pipeline(const std::string& pcap_path, const CnnModel& cnn,
                                        const BiLstmModel& bilstm,
                                        const PipelineOptions& options = {});

}  // namespace falcon::net

#include "falcon/net_pipeline.hpp"

#include "falcon/error.hpp"

namespace falcon::net {

std::vector<img::FlowImage> capture_to_images(const pcap::CaptureSet& capture,
                                              img::SerializeMode mode) {
  std::vector<img::FlowImage> images;
  images.reserve(capture.flows.size());
  for (const auto& flow : capture.flows) {
    const Bytes raw = img::serialize_flow(flow, mode);
    const auto record = img::normalize_784(std::span<const std::uint8_t>(raw.data(), raw.size()));
    images.push_back(img::to_image(record));
  }
  return images;
}

CaptureSequence capture_to_sequence(const pcap::CaptureSet& capture, const CnnModel& cnn,
                                    img::SerializeMode mode) {
  CaptureSequence seq;
  seq.source_name = capture.source_name;
  for (const auto& image : capture_to_images(capture, mode))
    seq.vectors.push_back(img2vec(cnn, image));
  return seq;
}

NetworkFeature network_feature_pipeline(const std::string& pcap_path, const CnnModel& cnn,
                                        const BiLstmModel& bilstm,
                                        const PipelineOptions& options) {
  const pcap::CaptureSet capture = pcap::read_capture(pcap_path, options.bidirectional);
  if (capture.flows.empty()) fail(errc::no_flows, "no usable flows in " + pcap_path);
  const CaptureSequence seq = capture_to_sequence(capture, cnn, options.mode);
  return encode_capture(bilstm, seq);
}

}  // namespace falcon::net

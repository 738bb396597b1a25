#include "falcon/error.hpp"

namespace falcon {

const char* errc_name(errc c) {
  switch (c) {
    case errc::bad_magic: return "BadMagic";
    case errc::truncated: return "Truncated";
    case errc::bad_length: return "BadLength";
    case errc::dim_mismatch: return "DimMismatch";
    case errc::count_mismatch: return "CountMismatch";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::label_out_of_range: return "LabelOutOfRange";
    case errc::empty_corpus: return "EmptyCorpus";
    case errc::empty_sequence: return "EmptySequence";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::empty_graph: return "EmptyGraph";
    case errc::schema_error: return "SchemaError";
    case errc::degenerate_corpus: return "DegenerateCorpus";
    case errc::degenerate_labels: return "DegenerateLabels";
    case errc::unknown_family: return "UnknownFamily";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::empty_input: return "Empty";
    case errc::bad_hyperparameters: return "BadHyperparameters";
    case errc::no_flows: return "NoFlows";
    case errc::io_error: return "IoError";
    case errc::bad_config: return "BadConfig";
    case errc::numeric_error: return "NumericError";
  }
  return "UnknownError";
}

}  // namespace falcon

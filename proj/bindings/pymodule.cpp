// Copyright (c) 2026 segagg authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "segagg/commands.hpp"
#include "segagg/config.hpp"
#include "segagg/evaluation.hpp"
#include "segagg/model.hpp"
#include "segagg/ops.hpp"
#include "segagg/segmentation.hpp"
#include "segagg/synthdata.hpp"
#include "segagg/training.hpp"

namespace py = pybind11;
using namespace segagg;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& array,
                         bool requires_grad) {
  std::vector<int64_t> shape(array.ndim());
  for (py::ssize_t i = 0; i < array.ndim(); ++i) shape[i] = array.shape(i);
  std::vector<double> values(array.data(), array.data() + array.size());
  return Tensor::from_values(std::move(shape), std::move(values), requires_grad);
}

py::array_t<double> array_from_span(std::span<const double> values,
                                    const std::vector<int64_t>& shape) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  py::array_t<double> array(dims);
  std::copy(values.begin(), values.end(), array.mutable_data());
  return array;
}

std::vector<double> vector_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
  return std::vector<double>(array.data(), array.data() + array.size());
}

}  // namespace

PYBIND11_MODULE(segagg, m) {
  m.doc() = "Segment-aggregation speaker verification core";

  py::class_<Tensor>(m, "Tensor")
      .def(py::init([](const py::array_t<double, py::array::c_style | py::array::forcecast>& array,
                       bool requires_grad) {
             return tensor_from_array(array, requires_grad);
           }),
           py::arg("values"), py::arg("requires_grad") = false)
      .def_property_readonly("shape", [](const Tensor& t) { return t.shape(); })
      .def_property_readonly("requires_grad", &Tensor::requires_grad)
      .def("values", [](const Tensor& t) { return array_from_span(t.values(), t.shape()); })
      .def("grad", [](Tensor& t) { return array_from_span(t.grad(), t.shape()); })
      .def("item", &Tensor::item)
      .def("zero_grad", &Tensor::zero_grad);

  m.def("backward", &backward, py::arg("loss"));
  m.def("add", &add);
  m.def("sub", &sub);
  m.def("mul", &mul);
  m.def("scale", &scale);
  m.def("sum", &sum);
  m.def("mean", &mean);
  m.def("leaky_relu", &leaky_relu, py::arg("input"), py::arg("slope"));
  m.def("linear", py::overload_cast<const Tensor&, const Tensor&, const Tensor&>(&linear),
        py::arg("input"), py::arg("weight"), py::arg("bias"));
  m.def("conv1d", &conv1d, py::arg("input"), py::arg("kernel"), py::arg("stride") = 1,
        py::arg("padding") = 0);
  m.def("maxpool1d", &maxpool1d, py::arg("input"), py::arg("window"));
  m.def("softmax_cce", &softmax_cce, py::arg("logits"), py::arg("labels"));
  m.def("cosine_similarity", &cosine_similarity, py::arg("a"), py::arg("b"));

  m.def(
      "pre_emphasize",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         double coeff) {
        const std::vector<double> y = pre_emphasize(vector_from_array(x), coeff);
        return array_from_span(y, {static_cast<int64_t>(y.size())});
      },
      py::arg("x"), py::arg("coeff") = kDefaultPreEmphasis);

  py::class_<SegmentSpec>(m, "SegmentSpec")
      .def_readonly("segment_length", &SegmentSpec::segment_length)
      .def_readonly("overlap", &SegmentSpec::overlap)
      .def("hop", &SegmentSpec::hop);
  m.def("make_segment_spec", &make_segment_spec, py::arg("segment_length"),
        py::arg("overlap_fraction"));
  m.def(
      "segment_starts",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const SegmentSpec& spec) {
        return segment(vector_from_array(x), spec).starts;
      },
      py::arg("x"), py::arg("spec"));
  m.def(
      "segment_waveform",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const SegmentSpec& spec) {
        const SegmentSet set = segment(vector_from_array(x), spec);
        py::list out;
        for (const auto& seg : set.segments) {
          out.append(array_from_span(seg, {static_cast<int64_t>(seg.size())}));
        }
        return out;
      },
      py::arg("x"), py::arg("spec"));
  m.def("aggregate", &aggregate, py::arg("embeddings"));

  m.def(
      "compute_eer",
      [](const std::vector<double>& target_scores,
         const std::vector<double>& impostor_scores) {
        ScoreSet scores{target_scores, impostor_scores};
        const EerResult result = compute_eer(scores);
        return py::make_tuple(result.eer_percent, result.threshold);
      },
      py::arg("target_scores"), py::arg("impostor_scores"));

  m.def(
      "synth_utterance",
      [](uint64_t master_seed, int speaker_id, uint64_t utterance_seed,
         int64_t duration, int sample_rate) {
        const SpeakerProfile profile = make_speaker(master_seed, speaker_id, {});
        const Waveform wave =
            synth_utterance(profile, utterance_seed, duration, sample_rate);
        return array_from_span(wave.samples,
                               {static_cast<int64_t>(wave.samples.size())});
      },
      py::arg("master_seed"), py::arg("speaker_id"), py::arg("utterance_seed"),
      py::arg("duration"), py::arg("sample_rate") = 4000);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("input_length", &ModelConfig::input_length)
      .def_readwrite("first_conv_channels", &ModelConfig::first_conv_channels)
      .def_readwrite("block_groups", &ModelConfig::block_groups)
      .def_readwrite("gru_hidden", &ModelConfig::gru_hidden)
      .def_readwrite("embedding_dim", &ModelConfig::embedding_dim)
      .def_readwrite("num_speakers", &ModelConfig::num_speakers)
      .def_readwrite("leaky_slope", &ModelConfig::leaky_slope)
      .def_readwrite("num_segment_output_layers",
                     &ModelConfig::num_segment_output_layers)
      .def("downsampling_factor", &ModelConfig::downsampling_factor);

  py::class_<Model>(m, "Model")
      .def_static("build", &Model::build, py::arg("config"), py::arg("seed"))
      .def_property_readonly("config", &Model::config)
      .def("freeze", &Model::freeze)
      .def(
          "embed",
          [](Model& model,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             bool training) {
            NoGradGuard guard;
            const Tensor batch = waveform_batch({vector_from_array(x)});
            const Tensor embedding = model.forward_embedding(batch, training);
            return array_from_span(embedding.values(),
                                   {embedding.dim(1)});
          },
          py::arg("waveform"), py::arg("training") = false);

  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));

  m.def("load_config", &load_config, py::arg("path"));
  py::class_<ExperimentConfig>(m, "ExperimentConfig");
  m.def("run_generate", &run_generate, py::arg("config"));
  m.def("run_train", [](const ExperimentConfig& c) { run_train(c); }, py::arg("config"));
  m.def("run_reproduce", [](const ExperimentConfig& c) { run_reproduce(c); },
        py::arg("config"));
}

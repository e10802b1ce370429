// SPDX-License-Identifier: Apache-2.0
#include "pmd/model/bi_encoder.hpp"

#include "pmd/rng.hpp"

namespace pmd::model {

template <class T>
BiEncoder<T> BiEncoder<T>::init(const EncoderConfig& config, std::uint64_t seed) {
  return {init_params<T>(config, derive_seed(seed, {1})),
          init_params<T>(config, derive_seed(seed, {2}))};
}

template <class T>
BiEncoder<T> BiEncoder<T>::zeros(const EncoderConfig& config) {
  return {EncoderParams<T>::zeros(config), EncoderParams<T>::zeros(config)};
}

std::size_t count_bi_encoder_params(const EncoderConfig& config, bool shared_token_embeddings) {
  const std::size_t one = count_params(config);
  return shared_token_embeddings ? 2 * one - config.vocab_size * config.hidden : 2 * one;
}

template <class To, class From>
BiEncoder<To> convert(const BiEncoder<From>& src) {
  auto out = BiEncoder<To>::zeros(src.config());
  std::vector<const Tensor<From>*> from;
  src.visit([&](const std::string&, const Tensor<From>& t) { from.push_back(&t); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Tensor<To>& t) {
    const auto& f = *from[i++];
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<To>(f[k]);
  });
  return out;
}

template struct BiEncoder<float>;
template struct BiEncoder<double>;
template BiEncoder<double> convert<double, float>(const BiEncoder<float>&);
template BiEncoder<float> convert<float, double>(const BiEncoder<double>&);

}  // namespace pmd::model

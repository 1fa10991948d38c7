// One encrypted control step on the desk preset, with the three roles
// written out inline.

#include <cstdio>

#include "evfc/pipeline.hpp"

int main() {
  using namespace evfc;
  const std::size_t n = 500;
  const double gain = 0.8, delta = 1 << 20;

  // designer
  const ParamsPtr params = setup("desk");
  const KeySet keys = keygen(params, power_of_two_steps(n), 42);
  const Encryptor enc(params, keys.pk);
  const BatchEncoder encoder(params);
  Rng rng(7);
  const OfflineBundle bundle = offline_setup(enc, encoder, gain, delta, n, rng);

  // camera: stage centred at pixel offset 30
  const Image frame = synthesize_image(30.0, n, 3, 10, 0);
  const Ciphertext c_I = camera_encrypt(enc, encoder, frame, rng);

  // server: evaluation keys only
  const Evaluator eval(params);
  const ServerResult r = server_evaluate(eval, bundle, c_I, keys.evaluation_keys());

  // actuator
  const Reading reading = actuator_read(*params, encoder, keys.sk, r);
  const double u = control_from_reading(reading, delta);
  const double u_plain = control_law(centroid(frame).g, gain);

  std::printf("num %lld, den %lld\n", static_cast<long long>(reading.num), static_cast<long long>(reading.den));
  std::printf("u encrypted %.6f, u plain %.6f\n", u, u_plain);
  std::printf("noise budget left %.0f bits\n", noise_budget(*params, keys.sk, r.c_num).budget_bits);
  std::printf("ops: %zu rotate, %zu add, %zu pmult, %zu cmult\n", eval.counts().rotate, eval.counts().add,
              eval.counts().pmult, eval.counts().cmult);
  return 0;
}

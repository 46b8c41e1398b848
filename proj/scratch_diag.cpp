// scratch: probe training dynamics on the synthetic set (not part of the build)
#include <cstdio>
#include <filesystem>

#include "metdet/train.hpp"
#include "tests/synthetic.hpp"

using namespace metdet;
using namespace metdet::testing;

int main() {
  auto data = make_separable_dataset(200, 100);

  // Probe the separability signal: cosine of h_c vs h_b per class.
  {
    TrainConfig cfg;
    cfg.encoder_dim = 16;
    cfg.max_seq_len = 64;
    const Vocab vocab = Vocab::build_from(data);
    auto sent = std::make_shared<ToyEncoder>(vocab.size(), 16, 64, 1);
    auto sense = std::make_shared<ToyEncoder>(vocab.size(), 16, 64, 2);
    EncoderStack stack{sent, sense, sense};
    double cos_lit_min = 2, cos_lit_max = -2, cos_met_min = 2, cos_met_max = -2;
    for (const auto& aug : data) {
      auto views = encode_views(aug, stack, vocab, 64);
      double c = cosine_similarity(views.h_c, views.h_b);
      if (aug.base.label == 0) {
        cos_lit_min = std::min(cos_lit_min, c);
        cos_lit_max = std::max(cos_lit_max, c);
      } else {
        cos_met_min = std::min(cos_met_min, c);
        cos_met_max = std::max(cos_met_max, c);
      }
    }
    std::printf("cos(h_c,h_b): literal [%g, %g], metaphor [%g, %g]\n", cos_lit_min,
                cos_lit_max, cos_met_min, cos_met_max);
  }

  for (double lr : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    for (int batch : {4, 8, 16}) {
      TrainConfig cfg;
      cfg.epochs = 3;
      cfg.warmup_epochs = 2;
      cfg.class_weight = 3.0;
      cfg.encoder_dim = 16;
      cfg.learning_rate = lr;
      cfg.batch_size = batch;
      cfg.dropout = 0.2;
      cfg.max_seq_len = 64;
      cfg.share_def_encoders = true;
      cfg.seeds = {1};
      const auto ckpt = std::filesystem::temp_directory_path() / "diag.ckpt";
      auto run = train_one(cfg, data, data, 1, ckpt);
      std::printf("lr=%-5g batch=%-3d train F1=%.4f losses:", lr, batch,
                  run.val_metrics.f1);
      for (double l : run.per_epoch_loss) std::printf(" %.4f", l);
      std::printf("\n");
    }
  }
  return 0;
}

// Five tokens, two labels. "joy" and "sad" sit on orthogonal axes, token 2 is a
// near-copy of "joy", token 3 of "sad", and token 4 lies between them.
// The model puts twice as much mass on the joy copy as on anything else, which
// standard scoring cannot see.

#include <cmath>
#include <cstdio>

#include "semx/semx.hpp"

int main() {
    using namespace semx;
    const float h = static_cast<float>(1.0 / std::sqrt(2.0));
    const EmbeddingMatrix E(5, 2, {1, 0, 0, 1, 1, 0, 0, 1, h, h});
    const LabelSet labels({{"joy", 0}, {"sad", 1}});
    const LogitRecord record{"demo", DenseLogits{{0.0, 0.0, std::log(2.0), 0.0, 0.0}}, HardLabel{0}};

    const auto kernel = build_kernel(E, labels, 0.80);
    const auto standard = constrained_softmax(record, labels);
    const auto semantic = semantic_softmax(record, kernel, labels, 5);

    std::printf("%-8s %8s %8s\n", "", "joy", "sad");
    std::printf("%-8s %8.4f %8.4f\n", "standard", standard.probs[0], standard.probs[1]);
    std::printf("%-8s %8.4f %8.4f\n", "semantic", semantic.probs[0], semantic.probs[1]);
}

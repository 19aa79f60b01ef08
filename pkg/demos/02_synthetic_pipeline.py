#!/usr/bin/env python3
"""End-to-end run on synthetic data: generate an oddball session with a
planted 300 ms response, preprocess it, train the five-member ensemble on
balanced subsets, and sweep character accuracy over repetitions.

Uses a reduced training schedule so the whole script finishes in about a
minute; see the acceptance suite for the full regime.
"""

import numpy as np

from p3speller import dsp, ensemble, metrics, nn, sampling, speller, synth

rng_seed = 7

print("1. generating sessions (12 train / 10 test characters) ...")
train_cfg = synth.SynthConfig(n_characters=12, amplitude=4.0, seed=rng_seed)
test_cfg = synth.SynthConfig(n_characters=10, amplitude=4.0,
                             seed=rng_seed + 1)
train_session = synth.generate_session(train_cfg)
test_session = synth.generate_session(test_cfg)
print(f"   train: {len(train_session.markers)} flashes over "
      f"{train_session.n_samples / 240:.0f} s of 64-channel EEG")

print("2. bandpass filtering and epoch extraction ...")
bandpass = dsp.design_cheby1_bandpass()
train_epochs = dsp.extract_epochs(train_session, bandpass)
test_epochs = dsp.extract_epochs(test_session, bandpass)
print(f"   {len(train_epochs)} training epochs, "
      f"{int(train_epochs.is_target.sum())} targets "
      f"({train_epochs.is_target.mean():.1%})")

print("3. balanced subsets and member training ...")
config = nn.TrainConfig(epochs=10)   # short schedule for the demo
subsets = sampling.balance_subsets(train_epochs, 5, seed=rng_seed)
models, confusions = [], []
for i, subset in enumerate(subsets):
    train_part, val_part = sampling.split_validation(subset, 0.1, seed=i)
    model = nn.build_model(config, seed=i)
    x, y = train_part.arrays()
    history = nn.train(model, x, y, config, rng=np.random.default_rng(i))
    xv, yv = val_part.arrays()
    conf = metrics.confusion(yv, model.predict_proba(xv), 0.5)
    models.append(model)
    confusions.append(conf)
    print(f"   member {i}: {subset.p300_count}+{subset.non_p300_count} "
          f"epochs, final loss {history[-1]['loss']:.4f}, validation "
          f"true predictions {conf.true_predictions}/{conf.total}")

weights = ensemble.compute_weights(confusions)
bundle = ensemble.EnsembleBundle(models, weights, confusions)
print(f"   weights: {np.array2string(weights, precision=4)}")

print("4. scoring the test set ...")
scores = bundle.predict(test_epochs.data)
roc = metrics.roc_auc(test_epochs.is_target, scores)
print(f"   single-flash ensemble AUC: {roc.auc:.4f} "
      f"(d' = {metrics.d_prime(min(roc.auc, 1 - 1e-9)):.3f})")

print("5. character accuracy vs repetitions ...")
accuracy, predictions = speller.accuracy_vs_repetitions(bundle, test_epochs)
for j in (1, 3, 5, 10, 15):
    print(f"   {j:2d} repetitions: {accuracy[j - 1]:.2f}")
spelled = "".join(p["predicted"][-1] for p in predictions)
target = "".join(p["target"] for p in predictions)
print(f"   target text:  {target}")
print(f"   decoded text: {spelled}")

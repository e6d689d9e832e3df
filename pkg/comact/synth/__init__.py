"""
The synthetic multi-modal benchmark with known compositional structure (:mod:`comact.synth.generator`)
and the exact posterior of its generative process (:mod:`comact.synth.oracle`).
"""
from comact.synth.generator import SynthConfig, LatentScript, generate_dataset, load_latents, load_synth_config
from comact.synth.oracle import bayes_oracle, oracle_accuracy

"""Visual proprioception benchmark for a simulated 6-DoF tabletop arm.

The package regresses the arm's normalized 6-component configuration
(height, distance, heading, wrist angle, wrist rotation, gripper) from a
single camera observation. Observations come from a built-in simulator
(kinematics + scene), latent encoders turn them into fixed-width vectors
(fiducial bag, conv-VAE, frozen backbone + tuned reductor), and one
shared MLP regressor maps latents to configurations. Everything runs on
numpy; the neural substrate lives in :mod:`proprio.tensorcore`.
"""

__version__ = "1.0.0"

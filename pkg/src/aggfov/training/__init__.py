"""Loss, optimizer, training loop, evaluation and checkpoints."""

from .checkpoint import (Checkpoint, CheckpointError, CheckpointVersionError,
                         CorruptCheckpointError, VocabMismatchError,
                         load_checkpoint, model_digest, restore_model,
                         save_checkpoint)
from .config import ModelConfig
from .features import (conditioning_sets, decoder_batch, encoder_batch,
                       ingredient_targets, instruction_tokens)
from .losses import (grad_ingredient_loss_wrt_z, ingredient_loss,
                     ingredient_loss_from_logits, instruction_loss)
from .network import (IngredientPrediction, IngredientPredictor,
                      InstructionDecoder, RecipeEncoder, RecipeModel,
                      pool_step_logits, top_set_from_probs)

__all__ = [
    "Checkpoint", "CheckpointError", "CheckpointVersionError",
    "CorruptCheckpointError", "VocabMismatchError", "load_checkpoint",
    "model_digest", "restore_model", "save_checkpoint", "ModelConfig",
    "conditioning_sets", "decoder_batch", "encoder_batch", "ingredient_targets",
    "instruction_tokens", "grad_ingredient_loss_wrt_z", "ingredient_loss",
    "ingredient_loss_from_logits", "instruction_loss", "IngredientPrediction",
    "IngredientPredictor", "InstructionDecoder", "RecipeEncoder", "RecipeModel",
    "pool_step_logits", "top_set_from_probs",
]

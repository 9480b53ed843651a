"""Layout-guided region editing on a toy video diffusion stack."""

try:
    from regionedit._core import (  # type: ignore[attr-defined]
        edit,
        embed_prompt,
        invert,
        modulation_strength,
        palette,
        synth_scene,
    )
except ImportError:
    # Build-tree layout: the extension sits next to the package on PYTHONPATH.
    from _core import (  # type: ignore[no-redef]
        edit,
        embed_prompt,
        invert,
        modulation_strength,
        palette,
        synth_scene,
    )

__all__ = [
    "edit",
    "embed_prompt",
    "invert",
    "modulation_strength",
    "palette",
    "synth_scene",
]

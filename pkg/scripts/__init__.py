"""
Coex Toolkit - politiques d'interférence D2D/LTE orientées contenu vidéo.
"""

__version__ = "1.0.0"

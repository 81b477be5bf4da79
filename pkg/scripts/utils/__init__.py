# Utilitaires Coex Toolkit

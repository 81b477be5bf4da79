# Configuration d'exécution Coex Toolkit

# Blueprints of the JSON API: stored runs and limit calculators

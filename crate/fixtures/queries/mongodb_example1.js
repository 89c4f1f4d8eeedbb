db.Projects.find({ "assigned_to": "Aniruddha Salve", "status": "active" });